// SPDX-License-Identifier: Apache-2.0
#include "usn/bench.hpp"

#include "usn/almostbanded.hpp"
#include "usn/fastapply.hpp"
#include "usn/krylov.hpp"
#include "usn/ultraops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace usn {

std::optional<std::size_t> reference_length(const std::string& name) {
  static const std::map<std::string, std::size_t> table = {
      {"blasius", 54},          {"falkner-skan", 40},  {"fisher-kpp", 56},   {"fourth-order", 28},
      {"bratu", 39},            {"lane-emden", 69},    {"gulf-stream", 71},  {"interior-layer", 1084},
      {"boundary-layer", 275},  {"sawtooth", 432},     {"allen-cahn", 79},   {"pendulum", 51},
      {"carrier", 211},         {"painleve", 51},      {"birkisson-1", 23},  {"birkisson-2", 49},
      {"birkisson-3", 84}};
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

bool CaseResult::length_within(double factor) const noexcept {
  if (!reference || length == 0) return false;
  const double r = static_cast<double>(length) / static_cast<double>(*reference);
  return r <= factor && r >= 1.0 / factor;
}

CaseResult run_case(const std::string& name, const NewtonConfig& cfg,
                    const std::map<std::string, double>& overrides) {
  const Problem p = make_problem(name, overrides);
  const NewtonResult r = solve(p, cfg);
  CaseResult c;
  c.problem = name;
  c.method = to_string(cfg.method);
  c.status = to_string(r.status);
  c.converged = r.converged();
  c.residual = r.residual;
  c.error = r.error;
  c.length = r.length;
  if (overrides.empty()) c.reference = reference_length(name);
  c.seconds = r.seconds;
  c.outer_iterations = r.outer_iterations;
  c.intermediate_iterations = r.intermediate_iterations;
  c.gmres_iterations = r.gmres_iterations;
  return c;
}

void write_bank_csv(std::ostream& os, std::span<const CaseResult> rows) {
  os << "problem,method,residual_or_error,time,length,status,residual,error,reference_length,"
        "outer_iterations,intermediate_iterations,gmres_iterations\n";
  const auto prec = os.precision(6);
  for (const auto& r : rows) {
    const bool has_error = std::isfinite(r.error);
    os << r.problem << ',' << r.method << ',' << (has_error ? r.error : r.residual) << ',' << r.seconds << ','
       << r.length << ',' << r.status << ',' << r.residual << ',';
    if (has_error) os << r.error;
    os << ',';
    if (r.reference) os << *r.reference;
    os << ',' << r.outer_iterations << ',' << r.intermediate_iterations << ',' << r.gmres_iterations << '\n';
  }
  os.precision(prec);
}

namespace {

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalue iteration did not converge");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

}  // namespace

Spectra compute_spectra(const Problem& p, const ChebSeries& u, std::size_t n) {
  if (n < 2 || n > kMaxSpectrumSize) {
    throw std::invalid_argument("compute_spectra: n must lie in [2, " + std::to_string(kMaxSpectrumSize) + "]");
  }
  const auto rows = boundary_rows(p);
  const OperatorSpec op = frechet_operator(p, u);
  const Eigen::MatrixXd j = dense_truncation(op, rows, n);
  const RightPreconditioner w = RightPreconditioner::build(op, rows, n, bandwidth_rule(n));
  Eigen::MatrixXd wj = j;
  for (Eigen::Index c = 0; c < wj.cols(); ++c) {
    w.solve_in_place<double>(std::span<double>(wj.col(c).data(), n));
  }
  Spectra s;
  s.n = n;
  s.original = eigenvalues(j);
  s.preconditioned = eigenvalues(wj);
  return s;
}

double fraction_within(std::span<const std::complex<double>> z, std::complex<double> c, double r) {
  if (z.empty()) return 0.0;
  std::size_t k = 0;
  for (const auto& v : z) k += std::abs(v - c) <= r ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(z.size());
}

double spread(std::span<const std::complex<double>> z, std::complex<double> c) {
  double m = 0.0;
  for (const auto& v : z) m = std::max(m, std::abs(v - c));
  return m;
}

void write_spectrum_csv(std::ostream& os, std::span<const std::complex<double>> z) {
  os << "re,im\n";
  const auto prec = os.precision(17);
  for (const auto& v : z) os << v.real() << ',' << v.imag() << '\n';
  os.precision(prec);
}

KrylovProbe probe_gmres(const Problem& p, const ChebSeries& u, std::size_t n, bool preconditioned,
                        double tol, std::size_t max_iterations, std::uint64_t seed) {
  const auto rows = boundary_rows(p);
  const OperatorSpec op = frechet_operator(p, u);
  const JacobianApplicator<double> j(op, rows, n);
  LinearOperator a;
  a.n = n;
  a.apply_double = [&j](std::span<const double> v, std::span<double> o) { j.apply(v, o); };
  const RightPreconditioner w = preconditioned ? RightPreconditioner::build(op, rows, n, bandwidth_rule(n))
                                               : RightPreconditioner::identity(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> b(n);
  for (double& x : b) x = dist(rng);
  GmresConfig gc;
  gc.restart = max_iterations;
  gc.max_cycles = 1;
  gc.forcing = tol;
  const GmresResult g = gmres_solve(a, w, b, gc);
  KrylovProbe out;
  out.converged = g.converged();
  out.iterations = g.iterations;
  out.relative_residual = g.rhs_norm > 0 ? g.residual_norm / g.rhs_norm : 0.0;
  return out;
}

}  // namespace usn
