// SPDX-License-Identifier: Apache-2.0
// Command-line driver: list, solve, bank, continue, spectrum, selftest.
#include "usn/bench.hpp"
#include "usn/continuation.hpp"
#include "usn/fastapply.hpp"
#include "usn/newton.hpp"
#include "usn/problems.hpp"
#include "usn/ultraops.hpp"

#include "CLI11.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace usn;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailed = 2;

struct RunConfig {
  std::string problem;
  std::map<std::string, double> overrides;
  std::string method = "trc";
  double tol = 1e-14;
  std::string precision = "full";
  std::size_t restart = 0;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::string report = "residual";

  NewtonConfig newton() const {
    NewtonConfig c;
    c.method = parse_method(method);
    c.eta_r = tol;
    c.precision = parse_precision(precision);
    c.restart = restart;
    c.validate();
    return c;
  }
};

std::ofstream open_out(const RunConfig& rc, const std::string& file) {
  fs::create_directories(rc.out);
  const fs::path path = fs::path(rc.out) / file;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::string sci(double v, int digits = 2) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os << std::scientific << std::setprecision(digits) << v;
  return os.str();
}

int cmd_list() {
  std::cout << std::left << std::setw(16) << "problem" << std::setw(10) << "order" << std::setw(14) << "domain"
            << std::setw(22) << "parameters" << std::setw(8) << "length" << std::setw(8) << "exact"
            << "note\n";
  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    std::ostringstream dom, par;
    dom << '[' << p.domain.a << ", " << p.domain.b << ']';
    for (const auto& [k, v] : p.params) par << k << '=' << v << ' ';
    const auto ref = reference_length(name);
    std::cout << std::setw(16) << name << std::setw(10) << p.order << std::setw(14) << dom.str() << std::setw(22)
              << par.str() << std::setw(8) << (ref ? std::to_string(*ref) : "-") << std::setw(8)
              << (p.has_closed_form() ? "yes" : "no") << p.note << '\n';
  }
  return kOk;
}

int cmd_solve(const RunConfig& rc) {
  const Problem p = make_problem(rc.problem, rc.overrides);
  const NewtonConfig cfg = rc.newton();
  if (rc.report == "error" && !p.has_closed_form()) {
    std::cerr << "solve: " << rc.problem << " has no closed form, --report error is unavailable\n";
    return kUsage;
  }
  const NewtonResult r = solve(p, cfg);
  const std::string stem = rc.problem + "_" + rc.method;
  {
    auto os = open_out(rc, stem + "_coeffs.csv");
    write_coefficients_csv(os, r.solution.coeffs().first(r.length));
  }
  {
    auto os = open_out(rc, stem + "_trace.json");
    os << r.trace.to_json() << '\n';
  }
  std::ostringstream s;
  s << "problem      " << rc.problem << '\n'
    << "method       " << rc.method << " (" << to_string(cfg.precision) << " precision)\n"
    << "status       " << to_string(r.status) << '\n'
    << "residual     " << sci(r.residual) << "  (stop at " << sci(r.eta) << ")\n";
  if (rc.report == "error") s << "error        " << sci(r.error) << '\n';
  const auto ref = rc.overrides.empty() ? reference_length(rc.problem) : std::nullopt;
  s << "length       " << r.length;
  if (ref) s << "  (reference " << *ref << ')';
  s << '\n'
    << "time         " << sci(r.seconds) << " s\n"
    << "outer        " << r.outer_iterations << '\n'
    << "intermediate " << r.intermediate_iterations << '\n'
    << "gmres        " << r.gmres_iterations << '\n';
  std::cout << s.str();
  {
    auto os = open_out(rc, stem + "_summary.txt");
    os << s.str();
  }
  if (!r.converged()) {
    std::cerr << "solve: newton stage failed: " << to_string(r.status) << '\n';
    return kFailed;
  }
  return kOk;
}

int cmd_bank(const RunConfig& rc, const std::vector<std::string>& methods, double gate) {
  std::vector<CaseResult> rows;
  for (const auto& m : methods) {
    RunConfig c = rc;
    c.method = m;
    const NewtonConfig cfg = c.newton();
    for (const auto& name : problem_names()) {
      rows.push_back(run_case(name, cfg));
      const auto& r = rows.back();
      std::cout << std::left << std::setw(5) << m << std::setw(16) << name << std::setw(22) << r.status << "residual "
                << sci(r.residual) << "  length " << std::setw(7) << r.length << " time " << sci(r.seconds) << " s\n";
    }
  }
  {
    auto os = open_out(rc, "bank.csv");
    write_bank_csv(os, rows);
  }
  bool ok = true;
  for (const auto& m : methods) {
    std::size_t pass = 0, total = 0, lengths = 0;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      ++total;
      pass += r.passes(gate) ? 1 : 0;
      lengths += r.length_within(2.0) ? 1 : 0;
    }
    const std::size_t need = m == "trc" ? total : (total >= 2 ? total - 2 : 0);
    const bool good = pass >= need;
    ok = ok && good && lengths == total;
    std::cout << m << ": " << pass << '/' << total << " residual <= " << sci(gate) << " (need " << need << "), "
              << lengths << '/' << total << " lengths within 2x of reference\n";
  }
  return ok ? kOk : kFailed;
}

int cmd_continue(const RunConfig& rc, double start, double target, double corrector_tol) {
  ContinuationConfig cc;
  cc.start_eps = start;
  cc.target_eps = target;
  cc.corrector_tol = corrector_tol;
  cc.final_solve = rc.newton();
  for (const auto& [k, v] : rc.overrides) {
    if (k != "eps") cc.fixed[k] = v;
  }
  cc.validate();
  const PathResult r = trace_path(rc.problem, cc);
  {
    auto os = open_out(rc, rc.problem + "_path.csv");
    r.write_csv(os);
  }
  if (r.final.solution.length() > 0) {
    auto os = open_out(rc, rc.problem + "_final_coeffs.csv");
    write_coefficients_csv(os, r.final.solution.coeffs().first(r.final.length));
    auto ts = open_out(rc, rc.problem + "_final_trace.json");
    ts << r.final.trace.to_json() << '\n';
  }
  std::cout << std::left << std::setw(12) << "eps" << std::setw(10) << "length" << std::setw(12) << "time"
            << "corrector\n";
  for (const auto& p : r.points) {
    std::cout << std::setw(12) << sci(p.eps) << std::setw(10) << p.length << std::setw(12) << sci(p.seconds)
              << p.corrector_iterations << '\n';
  }
  if (r.final.solution.length() > 0) {
    std::cout << std::setw(12) << sci(target) << std::setw(10) << r.final.length << std::setw(12)
              << sci(r.final.seconds) << "final, residual " << sci(r.final.residual) << '\n';
  }
  std::cout << "status " << to_string(r.status) << ", total " << sci(r.seconds) << " s\n";
  if (!r.ok()) {
    std::cerr << "continue: path failed: " << to_string(r.status) << '\n';
    return kFailed;
  }
  return kOk;
}

int cmd_spectrum(const RunConfig& rc, std::size_t n_req) {
  if (n_req > kMaxSpectrumSize) {
    std::cerr << "spectrum: n = " << n_req << " exceeds the dense bound " << kMaxSpectrumSize << '\n';
    return kUsage;
  }
  const Problem p = make_problem(rc.problem, rc.overrides);
  const NewtonResult r = solve(p, rc.newton());
  if (!r.converged()) {
    std::cerr << "spectrum: newton stage failed: " << to_string(r.status) << '\n';
    return kFailed;
  }
  const std::size_t final_n = r.trace.entries.empty() ? r.length : r.trace.entries.back().n;
  const std::size_t n = n_req > 0 ? n_req : std::min<std::size_t>(final_n, 512);
  const Spectra s = compute_spectra(p, r.solution, std::max<std::size_t>(n, 2));
  {
    auto os = open_out(rc, rc.problem + "_spectrum_original.csv");
    write_spectrum_csv(os, s.original);
  }
  {
    auto os = open_out(rc, rc.problem + "_spectrum_preconditioned.csv");
    write_spectrum_csv(os, s.preconditioned);
  }
  std::cout << "n " << s.n << '\n'
            << "within 0.5 of 1: original " << fraction_within(s.original, 1.0, 0.5) << ", preconditioned "
            << fraction_within(s.preconditioned, 1.0, 0.5) << '\n'
            << "max |lambda|: original " << sci(spread(s.original, 0.0)) << ", preconditioned "
            << sci(spread(s.preconditioned, 0.0)) << '\n';
  return kOk;
}

int cmd_selftest(const RunConfig& rc) {
  std::mt19937_64 rng(rc.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  bool ok = true;
  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    // a smooth iterate with the right boundary values
    const ChebSeries u0 = initial_iterate(p);
    std::vector<double> c(u0.coeffs().begin(), u0.coeffs().end());
    c.resize(8, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += 0.1 * dist(rng) / static_cast<double>((k + 1) * (k + 1));
    const ChebSeries u(c, p.domain);
    OperatorSpec op;
    try {
      op = frechet_operator(p, u);
    } catch (const DomainError&) {
      op = frechet_operator(p, u0);
    }
    const auto rows = boundary_rows(p);
    double worst = 0.0, adj = 0.0;
    for (std::size_t n : {32u, 128u}) {
      const JacobianApplicator<double> j(op, rows, n);
      const Eigen::MatrixXd dense = dense_truncation(op, rows, n);
      Eigen::VectorXd v(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k) {
        const double decay = std::pow(0.9, static_cast<double>(k));
        v(static_cast<Eigen::Index>(k)) = dist(rng) * decay;
        w(static_cast<Eigen::Index>(k)) = dist(rng) * decay;
      }
      const auto jv = j.apply(std::span<const double>(v.data(), n));
      const auto jtw = j.transpose_apply(std::span<const double>(w.data(), n));
      const Eigen::VectorXd ref = dense * v, reft = dense.transpose() * w;
      const Eigen::Map<const Eigen::VectorXd> a(jv.data(), static_cast<Eigen::Index>(n));
      const Eigen::Map<const Eigen::VectorXd> at(jtw.data(), static_cast<Eigen::Index>(n));
      // scale by |J| |v|, the size rounding in any apply is measured against
      const double sa = (dense.cwiseAbs() * v.cwiseAbs()).norm();
      const double st = (dense.transpose().cwiseAbs() * w.cwiseAbs()).norm();
      // the fast apply routes order-lambda terms through lambda - 1 inverse
      // conversions to C^(1), each with entries growing like n, and back up, so
      // its rounding grows like n^(order - 1); errors are reported against that
      const double bound = 1e-14 * std::pow(static_cast<double>(n), p.order - 1);
      worst = std::max({worst, (a - ref).norm() / sa / bound, (at - reft).norm() / st / bound});
      const double l = a.dot(w), r = v.dot(at);
      adj = std::max(adj, std::abs(l - r) / (w.cwiseAbs().dot(dense.cwiseAbs() * v.cwiseAbs())) / bound);
    }
    const bool pass = worst <= 1.0 && adj <= 1.0;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << std::left << std::setw(16) << name << "apply " << sci(worst)
              << "  adjoint " << sci(adj) << "  (in units of 1e-14 n^(order-1))" << '\n';
  }
  return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ultraspherical Newton-GMRES solver for nonlinear boundary-value problems"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file mirroring the flags");

  RunConfig rc;
  std::optional<double> beta, eps, length;
  app.add_option("--method", rc.method, "globalization: trd, lsb or trc")
      ->check(CLI::IsMember({"trd", "lsb", "trc"}))
      ->capture_default_str();
  app.add_option("--tol", rc.tol, "relative stopping tolerance eta_r")->capture_default_str();
  app.add_option("--precision", rc.precision, "inner GMRES precision: full or mixed")
      ->check(CLI::IsMember({"full", "mixed"}))
      ->capture_default_str();
  app.add_option("--restart", rc.restart, "GMRES restart length, 0 for the size rule")->capture_default_str();
  app.add_option("--out", rc.out, "output directory")->capture_default_str();
  app.add_option("--seed", rc.seed, "seed for randomized checks")->capture_default_str();
  app.add_option("--beta", beta, "problem parameter beta");
  app.add_option("--eps", eps, "problem parameter eps");
  app.add_option("--L", length, "problem parameter L");

  auto* list = app.add_subcommand("list", "list the problem bank");

  auto* solve_cmd = app.add_subcommand("solve", "solve one problem");
  solve_cmd->add_option("problem", rc.problem, "problem name")->required();
  solve_cmd->add_option("--report", rc.report, "residual or error (closed form)")
      ->check(CLI::IsMember({"residual", "error"}))
      ->capture_default_str();

  auto* bank = app.add_subcommand("bank", "run the whole bank under each method");
  std::vector<std::string> methods{"trd", "lsb", "trc"};
  double gate = 1e-11;
  bank->add_option("--methods", methods, "methods to run")->check(CLI::IsMember({"trd", "lsb", "trc"}));
  bank->add_option("--gate", gate, "residual gate")->capture_default_str();

  auto* cont = app.add_subcommand("continue", "arclength continuation in eps");
  double start = 5e-2, target = 7.59e-4, corrector_tol = 1e-3;
  cont->add_option("problem", rc.problem, "problem name")->required();
  cont->add_option("--start", start, "starting eps")->capture_default_str();
  cont->add_option("--target", target, "target eps")->capture_default_str();
  cont->add_option("--corrector-tol", corrector_tol, "corrector residual tolerance")->capture_default_str();

  auto* spec = app.add_subcommand("spectrum", "eigenvalues of J_n and J_n W_n^-1 at the solution");
  std::size_t spec_n = 0;
  spec->add_option("problem", rc.problem, "problem name")->required();
  spec->add_option("--n", spec_n, "system size, 0 for min(final size, 512)")->capture_default_str();

  auto* self = app.add_subcommand("selftest", "fast applies against dense truncations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (beta) rc.overrides["beta"] = *beta;
  if (eps) rc.overrides["eps"] = *eps;
  if (length) rc.overrides["L"] = *length;

  try {
    if (*list) return cmd_list();
    if (!rc.problem.empty()) make_problem(rc.problem, rc.overrides);  // reject bad names before any work
    if (*solve_cmd) return cmd_solve(rc);
    if (*bank) return cmd_bank(rc, methods, gate);
    if (*cont) return cmd_continue(rc, start, target, corrector_tol);
    if (*spec) return cmd_spectrum(rc, spec_n);
    if (*self) return cmd_selftest(rc);
  } catch (const UnknownProblem& e) {
    std::cerr << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
