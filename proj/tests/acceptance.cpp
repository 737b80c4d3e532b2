// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exits 0 once every criterion has been evaluated; a nonzero exit means the
// run itself broke.
#include "usn/almostbanded.hpp"
#include "usn/bench.hpp"
#include "usn/continuation.hpp"
#include "usn/fastapply.hpp"
#include "usn/newton.hpp"
#include "usn/problems.hpp"
#include "usn/ultraops.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace usn;
using usn::testing::eval_basis;
using usn::testing::random_vector;
using usn::testing::recurrence_mult;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

int passed = 0;
std::ostringstream report;  // copy of everything printed, for --report

void say(const std::string& line) {
  std::cout << line << '\n' << std::flush;
  report << line << '\n';
}

void verdict(int id, const std::string& title, bool ok) {
  passed += ok ? 1 : 0;
  std::ostringstream os;
  os << (ok ? "PASS " : "FAIL ") << std::setw(2) << id << "  " << title;
  say(os.str());
}

void info(const std::string& s) { say("        " + s); }

NewtonConfig method_config(GlobalMethod m, Precision prec = Precision::full) {
  NewtonConfig c;
  c.method = m;
  c.eta_r = 1e-14;
  c.precision = prec;
  return c;
}

const std::vector<GlobalMethod> kMethods = {GlobalMethod::trust_region_dogleg, GlobalMethod::line_search,
                                            GlobalMethod::trust_region_contravariant};

// bank runs shared by criteria 1-3 and 8, keyed by (problem, method)
std::map<std::pair<std::string, std::string>, CaseResult> bank;
double bank_seconds = 0.0;

const CaseResult& bank_case(const std::string& name, GlobalMethod m) {
  return bank.at({name, to_string(m)});
}

void run_bank() {
  const auto t0 = Clock::now();
  for (GlobalMethod m : kMethods) {
    for (const auto& name : problem_names()) bank[{name, to_string(m)}] = run_case(name, method_config(m));
  }
  bank_seconds = since(t0);
}

// 1. closed-form accuracy
void criterion1() {
  bool ok = true;
  for (const std::string name : {"lane-emden", "birkisson-1", "birkisson-2", "birkisson-3", "bratu"}) {
    const Problem p = make_problem(name);
    if (!p.has_closed_form()) {
      info(name + ": no validated closed form, skipped");
      continue;
    }
    std::ostringstream line;
    line << name << ':';
    for (GlobalMethod m : kMethods) {
      const auto& r = bank_case(name, m);
      const bool good = r.converged && std::isfinite(r.error) && r.error <= 1e-10;
      ok = ok && good;
      line << ' ' << to_string(m) << ' ' << sci(r.error) << (good ? "" : " (!)");
    }
    info(line.str());
  }
  verdict(1, "closed-form coefficient error <= 1e-10 under all three methods", ok);
}

// 2. bank residuals
void criterion2() {
  bool ok = bank_seconds < 300.0;
  for (GlobalMethod m : kMethods) {
    std::size_t good = 0, total = 0;
    std::string misses;
    for (const auto& name : problem_names()) {
      ++total;
      const auto& r = bank_case(name, m);
      if (r.passes(1e-11)) {
        ++good;
      } else {
        misses += " " + name + "(" + r.status + ", " + sci(r.residual) + ")";
      }
    }
    const std::size_t need = m == GlobalMethod::trust_region_contravariant ? total : total - 2;
    ok = ok && good >= need;
    info(to_string(m) + ": " + std::to_string(good) + "/" + std::to_string(total) + " (need " +
         std::to_string(need) + ")" + (misses.empty() ? "" : ", missed:" + misses));
  }
  info("bank time " + sci(bank_seconds) + " s (limit 300 s)");
  verdict(2, "bank residuals <= 1e-11: TRC 17/17, TRD and LSB >= 15/17, under 5 min", ok);
}

// 3. solution lengths (TRC runs)
void criterion3() {
  bool ok = true;
  std::string misses;
  for (const auto& name : problem_names()) {
    const auto& r = bank_case(name, GlobalMethod::trust_region_contravariant);
    if (!r.length_within(2.0)) {
      ok = false;
      misses += " " + name + "(" + std::to_string(r.length) + " vs " +
                std::to_string(r.reference.value_or(0)) + ")";
    }
  }
  if (!misses.empty()) info("outside a factor 2:" + misses);
  verdict(3, "final lengths within a factor 2 of the reference lengths", ok);
}

// 4. fast apply against dense truncation at a mid-run iterate
void criterion4() {
  std::mt19937_64 rng(20240604);
  bool ok = true;
  double worst_apply = 0.0, worst_transpose = 0.0, worst_adjoint = 0.0;
  std::string misses;
  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    NewtonConfig cfg = method_config(GlobalMethod::trust_region_contravariant);
    cfg.track_error = false;
    const auto full = solve(p, cfg);
    cfg.max_outer = std::max<std::size_t>(1, full.outer_iterations / 2);
    const ChebSeries u = solve(p, cfg).solution;
    const OperatorSpec op = frechet_operator(p, u);
    const auto rows = boundary_rows(p);
    for (std::size_t n : {32u, 128u, 512u}) {
      // smooth vectors decaying to 1e-12 across n, the shape of Newton corrections
      const double decay = std::pow(1e-12, 1.0 / static_cast<double>(n));
      const auto v = random_vector(rng, n, decay);
      const auto w = random_vector(rng, n, decay);
      const JacobianApplicator<double> j(op, rows, n);
      const Eigen::MatrixXd a = dense_truncation(op, rows, n);
      const auto jv = j.apply(v);
      const auto jtw = j.transpose_apply(w);
      const Eigen::Map<const Eigen::VectorXd> ev(v.data(), static_cast<Eigen::Index>(n));
      const Eigen::Map<const Eigen::VectorXd> ew(w.data(), static_cast<Eigen::Index>(n));
      const Eigen::Map<const Eigen::VectorXd> ejv(jv.data(), static_cast<Eigen::Index>(n));
      const Eigen::Map<const Eigen::VectorXd> ejtw(jtw.data(), static_cast<Eigen::Index>(n));
      const Eigen::VectorXd ref = a * ev, reft = a.transpose() * ew;
      const double e1 = (ejv - ref).norm() / ref.norm();
      const double e2 = (ejtw - reft).norm() / reft.norm();
      const double e3 = std::abs(ejv.dot(ew) - ev.dot(ejtw)) / (ejv.norm() * ew.norm());
      worst_apply = std::max(worst_apply, e1);
      worst_transpose = std::max(worst_transpose, e2);
      worst_adjoint = std::max(worst_adjoint, e3);
      if (e1 > 1e-11 || e2 > 1e-11 || e3 > 1e-11) {
        ok = false;
        misses += " " + name + "@" + std::to_string(n) + "(" + sci(std::max({e1, e2, e3})) + ")";
      }
    }
  }
  info("worst relative error: apply " + sci(worst_apply) + ", transpose " + sci(worst_transpose) + ", adjoint " +
       sci(worst_adjoint));
  if (!misses.empty()) info("above 1e-11:" + misses);
  verdict(4, "fast apply and transpose match dense truncations to 1e-11 at n = 32, 128, 512", ok);
}

// 5. structured-operator identities
void criterion5() {
  std::mt19937_64 rng(5150);
  bool ok = true;
  const int n = 32;
  const auto a = random_vector(rng, 7);  // degree 6
  const Eigen::MatrixXd closed = dense_m1({a, 0}, n, n);
  const Eigen::MatrixXd conj = dense_conv(0, n, n + 2) * dense_m0({a, 0}, n + 2, n) * dense_conv_inv(0, n);
  const Eigen::MatrixXd rec = recurrence_mult(a, 1, n, n);
  const double m1a = (closed - conj).cwiseAbs().maxCoeff(), m1b = (closed - rec).cwiseAbs().maxCoeff();
  ok = ok && m1a <= 1e-12 && m1b <= 1e-12;
  info("M_1 closed form vs S_0 M_0 S_0^-1 " + sci(m1a) + ", vs recurrence " + sci(m1b));

  double inv = 0.0;
  for (int l = 0; l <= 4; ++l) {
    const auto v = random_vector(rng, 40);
    const auto s = conv_op_apply(l, {v, l}, 40);
    const auto back = conv_inv_apply(l, s, 40);
    for (std::size_t k = 0; k + 2 < 40; ++k) inv = std::max(inv, std::abs(back.coeffs[k] - v[k]));
  }
  ok = ok && inv <= 1e-12;
  info("S^-1 S on leading entries, levels 0-4: " + sci(inv));

  // D_lambda on a random degree-15 polynomial against the T-basis derivative
  // recurrence c'_{k-1} = c'_{k+1} + 2 k c_k, run in long double
  const auto t_derivative = [](std::vector<long double> c) {
    std::vector<long double> d(c.size(), 0.0L);
    for (std::size_t k = c.size() - 1; k >= 1; --k) {
      d[k - 1] = (k + 1 < c.size() ? d[k + 1] : 0.0L) + 2.0L * static_cast<long double>(k) * c[k];
    }
    d[0] /= 2.0L;
    return d;
  };
  const auto t_eval = [](const std::vector<long double>& c, long double x) {
    long double b1 = 0, b2 = 0;
    for (std::size_t k = c.size(); k-- > 1;) {
      const long double b0 = 2 * x * b1 - b2 + c[k];
      b2 = b1;
      b1 = b0;
    }
    return x * b1 - b2 + c[0];
  };
  const auto coeffs = random_vector(rng, 16);
  std::vector<long double> deriv(coeffs.begin(), coeffs.end());
  double dmax = 0.0, smax = 0.0;
  for (int l = 1; l <= 4; ++l) {
    deriv = t_derivative(deriv);
    const auto d = diff_op_apply(l, {coeffs, 0}, coeffs.size());
    long double scale = 0;
    for (long double c : deriv) scale += std::abs(c);
    for (double x : {-1.0, -0.97, -0.5, -0.1, 0.0, 0.33, 0.8, 1.0}) {
      const long double ref = t_eval(deriv, x);
      dmax = std::max(dmax, static_cast<double>(std::abs(eval_basis(d.coeffs, l, x) - ref) / scale));
    }
  }
  for (int l = 0; l <= 4; ++l) {
    const auto v = random_vector(rng, 12);
    const auto s = conv_op_apply(l, {v, l}, 14);
    for (double x : {-0.9, -0.2, 0.45, 0.99}) {
      smax = std::max(smax, std::abs(eval_basis(s.coeffs, l + 1, x) - eval_basis(v, l, x)));
    }
  }
  ok = ok && dmax <= 1e-10 && smax <= 1e-10;
  info("D_lambda pointwise " + sci(dmax) + ", S_lambda pointwise " + sci(smax));
  verdict(5, "structured-operator identities (M_1 routes 1e-12, S^-1 S, D and S pointwise 1e-10)", ok);
}

// 6. preconditioner clustering and GMRES counts
void criterion6() {
  bool ok = true;
  for (const std::string name : {"blasius", "fourth-order", "lane-emden", "interior-layer"}) {
    const Problem p = make_problem(name);
    NewtonConfig cfg = method_config(GlobalMethod::trust_region_contravariant);
    cfg.track_error = false;
    const auto r = solve(p, cfg);
    if (!r.converged()) {
      ok = false;
      info(name + ": solve failed");
      continue;
    }
    const std::size_t final_n = r.trace.entries.back().n;
    const std::size_t n = std::min<std::size_t>(final_n, 512);
    const Spectra s = compute_spectra(p, r.solution, n);
    const double frac = fraction_within(s.preconditioned, 1.0, 0.5);
    const auto pre = probe_gmres(p, r.solution, n, true, 1e-8, 150, 7);
    std::size_t unpre_converged = 0;
    std::size_t unpre_max = 0;
    for (std::uint64_t seed : {7u, 8u, 9u}) {
      const auto un = probe_gmres(p, r.solution, n, false, 1e-8, 150, seed);
      unpre_converged += un.converged ? 1 : 0;
      unpre_max = std::max(unpre_max, un.iterations);
    }
    const bool clustered = frac >= 0.9;
    const bool pre_ok = pre.converged && pre.iterations <= 150;
    ok = ok && clustered && pre_ok;
    if (name == "interior-layer") ok = ok && unpre_converged == 0;
    std::ostringstream line;
    line << name << ": n " << n << " (final " << final_n << "), within 0.5 of 1 " << frac << ", preconditioned "
         << pre.iterations << " its, unpreconditioned " << (unpre_converged == 3 ? "reaches" : "misses")
         << " 1e-8 (" << unpre_converged << "/3 seeds, max " << unpre_max << " its)";
    info(line.str());
  }
  verdict(6, "clustering >= 90% near 1, preconditioned GMRES <= 150 its, unpreconditioned fails on interior-layer",
          ok);
}

// 7. convergence shape
void criterion7() {
  bool ok = true;
  {
    const Problem p = make_problem("interior-layer");
    const auto r = solve(p, method_config(GlobalMethod::trust_region_contravariant));
    // global phase: intermediate iterations up to the last damped outer step
    std::size_t last_damped = 0;
    std::size_t k_damped = 0;
    for (const auto& e : r.trace.entries) {
      if (std::isfinite(e.step_scale) && e.step_scale < 1.0) {
        last_damped = e.intermediate_index + 1;
        k_damped = e.k + 1;
      }
    }
    const std::size_t quadratic = r.outer_iterations - k_damped;
    const bool good = r.converged() && last_damped >= 57 && last_damped <= 171 && quadratic <= 8;
    ok = ok && good;
    info("interior-layer TRC: global phase " + std::to_string(last_damped) + " intermediate iterations (" +
         std::to_string(k_damped) + " outer), quadratic phase " + std::to_string(quadratic) + " outer");
  }
  for (const std::string name : {"bratu", "lane-emden"}) {
    const auto r = solve(make_problem(name), method_config(GlobalMethod::trust_region_contravariant));
    const auto& g = r.outer_residuals;
    bool rate = r.converged();
    std::ostringstream line;
    line << name << ":";
    for (double x : g) line << ' ' << sci(x);
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
      // a step landing on the rounding floor shows no rate
      if (g[k] >= 1e-4 || g[k + 1] <= 100.0 * r.eta) continue;
      rate = rate && g[k + 1] <= 10.0 * std::pow(g[k], 1.8);
    }
    ok = ok && rate;
    info(line.str());
  }
  verdict(7, "interior-layer global phase 114 +- 50% then <= 8 quadratic steps; rate 1.8 below 1e-4", ok);
}

// 8. mixed precision against full precision (TRC, whole bank)
void criterion8() {
  bool ok = true;
  double full_time = 0.0, mixed_time = 0.0;
  std::string notes;
  for (const auto& name : problem_names()) {
    const auto& f = bank_case(name, GlobalMethod::trust_region_contravariant);
    const auto m = run_case(name, method_config(GlobalMethod::trust_region_contravariant, Precision::reduced));
    full_time += f.seconds;
    mixed_time += m.seconds;
    if (!f.passes(1e-11)) {
      notes += " " + name + "(full misses the gate, mixed " + (m.passes(1e-11) ? "meets" : "misses") + " it)";
      continue;
    }
    const long diff = static_cast<long>(m.outer_iterations) - static_cast<long>(f.outer_iterations);
    if (!m.passes(1e-11) || std::abs(diff) > 2) {
      ok = false;
      notes += " " + name + "(mixed " + m.status + " " + sci(m.residual) + ", outer " +
               std::to_string(m.outer_iterations) + " vs " + std::to_string(f.outer_iterations) + ")";
    }
  }
  info("time full " + sci(full_time) + " s, mixed " + sci(mixed_time) + " s (not gated)");
  if (!notes.empty()) info("notes:" + notes);
  verdict(8, "mixed precision meets the same gate with outer counts within 2", ok);
}

// 9. continuation at desk scale
void criterion9() {
  ContinuationConfig cc;
  cc.start_eps = 5e-2;
  cc.target_eps = 7.59e-4;
  const auto t0 = Clock::now();
  const PathResult r = trace_path("sawtooth", cc);
  const double secs = since(t0);
  bool corrector = true;
  std::size_t last_length = 0;
  for (const auto& pt : r.points) {
    corrector = corrector && pt.residual < 1e-3;
    last_length = pt.length;
  }
  const bool final_ok = r.ok() && r.final.converged() && r.final.residual <= r.final.eta;
  const bool band = r.final.length >= 2500 && r.final.length <= 10500;
  info("status " + to_string(r.status) + ", " + std::to_string(r.points.size()) + " points, time " + sci(secs) +
       " s");
  info("final residual " + sci(r.final.residual) + " (contract " + sci(r.final.eta) + "), final length " +
       std::to_string(r.final.length) + ", last intermediate length " + std::to_string(last_length) +
       " at eps " + (r.points.empty() ? std::string("-") : sci(r.points.back().eps)));
  verdict(9, "sawtooth path to 7.59e-4: correctors < 1e-3, final contract met, length in [2500, 10500], < 1 min",
          final_ok && corrector && band && secs < 60.0);
}

// 10. complexity
void criterion10() {
  // an interior-layer linearization: variable coefficients on two levels
  const Problem p = make_problem("interior-layer");
  NewtonConfig cfg = method_config(GlobalMethod::trust_region_contravariant);
  cfg.track_error = false;
  const auto sol = solve(p, cfg);
  const OperatorSpec op = frechet_operator(p, sol.solution);
  const auto rows = boundary_rows(p);
  std::mt19937_64 rng(10);
  auto median = [](std::vector<double> t) {
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    return t[t.size() / 2];
  };
  auto apply_time = [&](std::size_t n) {
    const JacobianApplicator<double> j(op, rows, n);
    const auto v = random_vector(rng, n);
    std::vector<double> out(n);
    j.apply(v, out);  // plans and caches
    std::vector<double> t;
    for (int rep = 0; rep < 101; ++rep) {
      const auto t0 = Clock::now();
      j.apply(v, out);
      t.push_back(since(t0));
    }
    return median(t);
  };
  const auto p_fixed = bandwidth_rule(2048);
  auto build_time = [&](std::size_t n) {
    std::vector<double> t;
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = Clock::now();
      const auto w = RightPreconditioner::build(op, rows, n, p_fixed);
      t.push_back(since(t0));
    }
    return median(t);
  };
  const double a1 = apply_time(2048), a2 = apply_time(8192);
  const double b1 = build_time(2048), b2 = build_time(8192);
  info("apply median " + sci(a1) + " s at 2048, " + sci(a2) + " s at 8192, ratio " + sci(a2 / a1) +
       " (limit 8)");
  info("preconditioner build+factor at p = " + std::to_string(p_fixed) + ": " + sci(b1) + " s at 2048, " + sci(b2) +
       " s at 8192, ratio " + sci(b2 / b1) + " (limit 5)");
  verdict(10, "apply 8192 vs 2048 <= 8x; preconditioner build+factor 4x size <= 5x", a2 <= 8 * a1 && b2 <= 5 * b1);
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number (default all ten);
  // --report PATH also writes the printed report to PATH
  std::vector<bool> want(11, true);
  std::string report_path;
  bool selected = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--report" && i + 1 < argc) {
      report_path = argv[++i];
      continue;
    }
    const int k = std::atoi(arg.c_str());
    if (k < 1 || k > 10) {
      std::cerr << "usage: acceptance [--report PATH] [criterion numbers 1-10]\n";
      return 1;
    }
    if (!selected) std::fill(want.begin(), want.end(), false);
    selected = true;
    want[static_cast<std::size_t>(k)] = true;
  }
  const std::vector<void (*)()> criteria = {nullptr,     criterion1, criterion2, criterion3, criterion4, criterion5,
                                            criterion6,  criterion7, criterion8, criterion9, criterion10};
  try {
    const auto t0 = Clock::now();
    if (want[1] || want[2] || want[3] || want[8]) {
      say("running the bank under three methods");
      run_bank();
    }
    int ran = 0;
    for (std::size_t k = 1; k <= 10; ++k) {
      if (!want[k]) continue;
      criteria[k]();
      ++ran;
    }
    say(std::to_string(passed) + "/" + std::to_string(ran) + " criteria pass, total " + sci(since(t0)) + " s");
    if (!report_path.empty()) {
      std::ofstream out(report_path);
      if (!out) throw std::runtime_error("cannot write " + report_path);
      out << report.str();
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
