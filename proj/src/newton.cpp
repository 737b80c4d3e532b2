// SPDX-License-Identifier: Apache-2.0
#include "usn/newton.hpp"

#include "usn/almostbanded.hpp"
#include "usn/fastapply.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace usn {

GlobalMethod parse_method(const std::string& name) {
  if (name == "trd") return GlobalMethod::trust_region_dogleg;
  if (name == "lsb") return GlobalMethod::line_search;
  if (name == "trc") return GlobalMethod::trust_region_contravariant;
  throw std::invalid_argument("unknown method: " + name + " (expected trd, lsb or trc)");
}

std::string to_string(GlobalMethod m) {
  switch (m) {
    case GlobalMethod::trust_region_dogleg: return "trd";
    case GlobalMethod::line_search: return "lsb";
    case GlobalMethod::trust_region_contravariant: return "trc";
  }
  return "unknown";
}

std::string to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::converged: return "converged";
    case NewtonStatus::rounding_floor: return "rounding-floor";
    case NewtonStatus::max_outer: return "max-outer-iterations";
    case NewtonStatus::backtracking_failed: return "backtracking-failed";
    case NewtonStatus::regularity_failed: return "regularity-test-failed";
    case NewtonStatus::resolution_failed: return "resolution-failed";
    case NewtonStatus::domain_error: return "domain-error";
  }
  return "unknown";
}

double NewtonConfig::initial_forcing() const {
  if (omega0 >= 0.0) return omega0;
  switch (method) {
    case GlobalMethod::trust_region_dogleg: return 0.1;
    case GlobalMethod::line_search: return 0.01;
    case GlobalMethod::trust_region_contravariant: return 1e-3;
  }
  return 0.1;
}

void NewtonConfig::validate() const {
  if (!(eta_r > 0.0 && eta_r < 1.0)) throw std::invalid_argument("NewtonConfig: eta_r must lie in (0, 1)");
  const double w = initial_forcing();
  if (!(w >= 0.0 && w < 1.0)) throw std::invalid_argument("NewtonConfig: omega0 must lie in [0, 1)");
  if (max_outer < 1) throw std::invalid_argument("NewtonConfig: max_outer must be positive");
  if (max_doublings < 0) throw std::invalid_argument("NewtonConfig: max_doublings must be non-negative");
  if (!(delta0 > 0.0)) throw std::invalid_argument("NewtonConfig: delta0 must be positive");
  if (!(gamma_min > 0.0 && gamma_min <= gamma_max && gamma_max < 1.0)) {
    throw std::invalid_argument("NewtonConfig: need 0 < gamma_min <= gamma_max < 1");
  }
}

std::string NewtonTrace::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  auto num = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  for (const auto& e : entries) {
    arr.push_back({{"k", e.k},
                   {"intermediate_index", e.intermediate_index},
                   {"n", e.n},
                   {"residual", num(e.residual)},
                   {"error", num(e.error)},
                   {"length", e.length},
                   {"omega", num(e.omega)},
                   {"step_scale", num(e.step_scale)},
                   {"gmres_iterations", e.gmres_iterations},
                   {"phase", e.phase}});
  }
  return arr.dump(1);
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t m = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < m; ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> padded(std::span<const double> v, std::size_t n) {
  std::vector<double> out(n, 0.0);
  std::copy_n(v.begin(), std::min(n, v.size()), out.begin());
  return out;
}

// u + scale * step. The sum is not chopped: tail coefficients far below
// max |u| still carry derivative boundary values through the k^2m weights.
ChebSeries add_step(const ChebSeries& u, std::span<const double> step, double scale) {
  std::vector<double> c = padded(u.coeffs(), std::max(u.length(), step.size()));
  for (std::size_t i = 0; i < step.size(); ++i) c[i] += scale * step[i];
  return ChebSeries(chop_coeffs(c, 0.0), u.domain());
}

struct Trial {
  bool ok = false;
  ChebSeries u;
  std::vector<double> g;
  double norm = std::numeric_limits<double>::infinity();
};

Trial evaluate(const Problem& p, ChebSeries u) {
  Trial t;
  t.u = std::move(u);
  try {
    t.g = residual_vector(p, t.u);
  } catch (const DomainError&) {
    return t;
  } catch (const ResolutionError&) {
    return t;
  }
  t.norm = norm2(t.g);
  t.ok = std::isfinite(t.norm);
  if (!t.ok) t.norm = std::numeric_limits<double>::infinity();
  return t;
}

std::size_t resolved_length(const ChebSeries& u) { return chop(u).length(); }

double coefficient_error(const ChebSeries& u, const ChebSeries& exact) {
  const std::size_t m = std::max(u.length(), exact.length());
  const auto a = padded(u.coeffs(), m), b = padded(exact.coeffs(), m);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Resolved Newton correction and what the postprocessing needs from the solve.
struct Direction {
  bool resolved = false;
  std::size_t n = 0;
  std::vector<double> delta;
  std::vector<double> f;         // G(u) truncated to n
  std::vector<double> lin;       // f + J delta
  double omega = 0.0;            // forcing actually achieved, at least the requested one
};

}  // namespace

ChebSeries initial_iterate(const Problem& p) {
  const auto rows = boundary_rows(p);
  const auto nb = static_cast<Eigen::Index>(rows.size());
  if (nb == 0) return ChebSeries::constant(0.0, p.domain);
  Eigen::MatrixXd a(nb, nb);
  Eigen::VectorXd rhs(nb);
  for (Eigen::Index t = 0; t < nb; ++t) {
    for (Eigen::Index k = 0; k < nb; ++k) a(t, k) = rows[static_cast<std::size_t>(t)].entry(static_cast<std::size_t>(k));
    rhs(t) = p.bcs[static_cast<std::size_t>(t)].value;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-13);
  if (lu.rank() < nb) {
    std::ostringstream msg;
    msg << "initial_iterate: boundary conditions of " << p.name << " are singular on T_0..T_" << nb - 1;
    throw std::runtime_error(msg.str());
  }
  const Eigen::VectorXd c = lu.solve(rhs);
  std::vector<double> coeffs(c.data(), c.data() + c.size());
  return chop(ChebSeries(std::move(coeffs), p.domain));
}

std::size_t initial_size(const OperatorSpec& op, std::size_t residual_length) {
  const auto order = static_cast<std::ptrdiff_t>(op.order);
  std::ptrdiff_t shift = std::numeric_limits<std::ptrdiff_t>::min();
  for (int l = 0; l <= op.order; ++l) {
    shift = std::max(shift, static_cast<std::ptrdiff_t>(op.degree(l)) - l);
  }
  const std::ptrdiff_t by_coeffs = order + shift;
  const auto by_residual = static_cast<std::ptrdiff_t>(residual_length);
  return static_cast<std::size_t>(std::max({by_coeffs, by_residual, order + 2}));
}

bool plateau_detected(std::span<const double> delta, const PlateauRule& rule, double scale) {
  const std::size_t m = delta.size();
  if (m < rule.min_length) return false;
  const double ref = std::max(max_abs(delta), scale);
  if (ref == 0.0) return true;
  const std::size_t tail = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(rule.tail_fraction * static_cast<double>(m))));
  const auto t = delta.subspan(m - tail);
  const double tmax = max_abs(t);
  if (tmax <= rule.floor * ref) return true;
  if (tmax > rule.flat_below * ref) return false;
  // envelope over neighbours so that parity zeros do not dominate the fit
  const double tiny = 1e-300;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto cnt = static_cast<double>(tail);
  for (std::size_t i = 0; i < tail; ++i) {
    double e = std::abs(t[i]);
    if (i + 1 < tail) e = std::max(e, std::abs(t[i + 1]));
    if (i > 0) e = std::max(e, std::abs(t[i - 1]));
    const double x = static_cast<double>(i), y = std::log(e + tiny * ref);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = cnt * sxx - sx * sx;
  const double slope = den > 0 ? (cnt * sxy - sx * sy) / den : 0.0;
  return slope >= rule.flat_slope;
}

double dogleg_fraction(std::span<const double> cauchy, std::span<const double> newton, double radius) {
  if (cauchy.size() != newton.size()) throw std::invalid_argument("dogleg_fraction: size mismatch");
  double a = 0, b = 0, c = -radius * radius;
  for (std::size_t i = 0; i < cauchy.size(); ++i) {
    const double d = newton[i] - cauchy[i];
    a += d * d;
    b += 2.0 * cauchy[i] * d;
    c += cauchy[i] * cauchy[i];
  }
  if (a == 0.0) return 0.0;
  const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  // c < 0 inside the region, so the roots have opposite signs
  return b > 0 ? -2.0 * c / (b + disc) : (-b + disc) / (2.0 * a);
}

double backtrack_factor(double g0, double dg0, double g1, double lo, double hi) {
  if (!std::isfinite(g1)) return lo;
  const double c2 = g1 - g0 - dg0;
  auto p = [&](double x) { return g0 + dg0 * x + c2 * x * x; };
  if (c2 > 0.0) return std::clamp(-dg0 / (2.0 * c2), lo, hi);
  return p(lo) <= p(hi) ? lo : hi;
}

double contravariant_prediction(double omega, double theta_h) {
  if (!(theta_h > 0.0)) return 1.0;
  return std::min(1.0, 1.0 / ((1.0 + omega) * theta_h));
}

double contravariant_forcing(double theta, double omega, double rho, double omega_min,
                             double omega_max) {
  const double hhat = 2.0 * rho * theta * theta / ((1.0 + rho) * (1.0 - omega * omega));
  // (sqrt(1 + h^2) - 1) / h written without cancellation; tends to h / 2 as h -> 0
  const double w = hhat > 0.0 ? hhat / (std::sqrt(1.0 + hhat * hhat) + 1.0) : 0.0;
  return std::max(std::min(w, omega_max), omega_min);
}

NewtonResult solve(const Problem& p, const NewtonConfig& cfg, const std::optional<ChebSeries>& u0) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  NewtonResult res;
  const auto rows = boundary_rows(p);
  const std::size_t nbc = rows.size();

  std::optional<ChebSeries> exact;
  if (cfg.track_error && p.has_closed_form()) exact = closed_form(p);

  Trial cur = evaluate(p, u0 ? *u0 : initial_iterate(p));
  auto finish = [&](NewtonStatus s) {
    res.status = s;
    res.solution = cur.u;
    res.length = resolved_length(cur.u);
    res.residual = cur.norm;
    if (exact) res.error = coefficient_error(cur.u, *exact);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
  };
  if (!cur.ok) return finish(NewtonStatus::domain_error);
  res.initial_residual = cur.norm;
  res.eta = cfg.eta_r * cur.norm + cfg.eta_r;
  res.outer_residuals.push_back(cur.norm);

  double omega = cfg.initial_forcing();
  double radius = cfg.delta0;
  double theta_h_prev = -1.0;  // Theta^{k-1} h^{k-1}, negative before the first step

  for (std::size_t k = 0;; ++k) {
    if (cur.norm <= res.eta) return finish(NewtonStatus::converged);
    if (k >= cfg.max_outer) return finish(NewtonStatus::max_outer);
    res.outer_iterations = k + 1;

    OperatorSpec op;
    try {
      op = frechet_operator(p, cur.u);
    } catch (const DomainError&) {
      return finish(NewtonStatus::domain_error);
    }
    const double err_k = exact ? coefficient_error(cur.u, *exact) : std::numeric_limits<double>::quiet_NaN();

    // intermediate loop: solve, test for a plateau, double
    Direction dir;
    std::size_t n = initial_size(op, cur.g.size() - nbc);
    std::vector<double> warm;
    for (int doubling = 0;; ++doubling) {
      if (n > cfg.max_size) break;
      auto jd = std::make_unique<JacobianApplicator<double>>(op, rows, n);
      std::unique_ptr<JacobianApplicator<float>> jf;
      LinearOperator lop;
      lop.n = n;
      lop.apply_double = [&j = *jd](std::span<const double> v, std::span<double> o) { j.apply(v, o); };
      if (cfg.precision == Precision::reduced) {
        jf = std::make_unique<JacobianApplicator<float>>(op, rows, n);
        lop.apply_float = [&j = *jf](std::span<const float> v, std::span<float> o) { j.apply(v, o); };
      }
      const RightPreconditioner w = RightPreconditioner::build(op, rows, n, bandwidth_rule(n));
      std::vector<double> f = padded(cur.g, n);
      std::vector<double> b(n);
      for (std::size_t i = 0; i < n; ++i) b[i] = -f[i];
      GmresConfig gc;
      gc.restart = cfg.restart > 0 ? cfg.restart : restart_rule(n);
      gc.max_cycles = cfg.max_cycles;
      gc.forcing = omega;
      gc.precision = cfg.precision;
      gc.iterate_from_guess = true;
      if (!warm.empty()) warm.resize(n, 0.0);
      GmresResult g = gmres_solve(lop, w, b, gc, warm);
      res.gmres_iterations += g.iterations;

      TraceEntry e;
      e.k = k;
      e.intermediate_index = res.intermediate_iterations++;
      e.n = n;
      e.residual = cur.norm;
      e.error = err_k;
      e.length = resolved_length(cur.u);
      e.omega = omega;
      e.gmres_iterations = g.iterations;
      e.phase = doubling == 0 ? "outer" : "intermediate";
      res.trace.entries.push_back(e);

      const double scale = cfg.plateau_uses_iterate ? cur.u.max_abs_coeff() : 0.0;
      const bool plateau = plateau_detected(g.delta, cfg.plateau, scale);
      if (plateau || doubling >= cfg.max_doublings || 2 * n > cfg.max_size) {
        dir.resolved = plateau;
        dir.n = n;
        dir.f = std::move(f);
        dir.lin.resize(n);
        for (std::size_t i = 0; i < n; ++i) dir.lin[i] = -g.residual[i];
        const double achieved = g.rhs_norm > 0 ? g.residual_norm / g.rhs_norm : 0.0;
        dir.omega = std::min(std::max(omega, achieved), 0.99);
        dir.delta = chop_coeffs(g.delta, kChopTol * max_abs(g.delta));
        dir.delta.resize(n, 0.0);
        break;
      }
      warm = std::move(g.delta);
      n *= 2;
    }
    if (!dir.resolved) return finish(NewtonStatus::resolution_failed);

    const std::span<const double> delta = dir.delta;
    const double fnorm = cur.norm;
    const bool at_floor = max_abs(delta) <= cfg.rounding_step * cur.u.max_abs_coeff();
    double step_scale = 1.0;
    bool accepted = false;

    if (cfg.method == GlobalMethod::trust_region_dogleg) {
      // The model uses enough rows that J times a length-n vector is not
      // truncated; the square n x n section drops the part that a step with
      // energy near index n sends past row n.
      std::size_t spread = 0;
      for (int l = 0; l <= op.order; ++l) spread = std::max(spread, op.degree(l));
      const std::size_t nw = std::max(dir.n + spread + nbc + 2, cur.g.size());
      const JacobianApplicator<double> wide(op, rows, nw);
      auto apply_wide = [&](std::span<const double> v) { return wide.apply(std::span<const double>(padded(v, nw))); };
      const std::vector<double> fw = padded(cur.g, nw);
      const double dn = norm2(delta);
      std::vector<double> step(delta.begin(), delta.end());
      if (dn > radius) {
        auto gv = wide.transpose_apply(std::span<const double>(fw));
        gv.resize(dir.n);
        const auto jg = apply_wide(gv);
        const double gg = dot(gv, gv), jgjg = dot(jg, jg);
        if (gg == 0.0 || jgjg == 0.0) {
          for (double& s : step) s *= radius / dn;
        } else {
          std::vector<double> dc(gv.size());
          for (std::size_t i = 0; i < dc.size(); ++i) dc[i] = -(gg / jgjg) * gv[i];
          const double gn = std::sqrt(gg);
          if (norm2(dc) >= radius) {
            for (std::size_t i = 0; i < step.size(); ++i) step[i] = -(radius / gn) * gv[i];
          } else {
            const double nu = dogleg_fraction(dc, delta, radius);
            for (std::size_t i = 0; i < step.size(); ++i) step[i] = dc[i] + nu * (delta[i] - dc[i]);
          }
        }
      }
      const double sn = norm2(step);
      step_scale = dn > 0 ? sn / dn : 1.0;
      const auto js = apply_wide(step);
      std::vector<double> model(fw);
      for (std::size_t i = 0; i < model.size(); ++i) model[i] += js[i];
      const double pred = dot(fw, fw) - dot(model, model);
      Trial t = evaluate(p, add_step(cur.u, step, 1.0));
      const double actual = t.ok ? fnorm * fnorm - t.norm * t.norm : -std::numeric_limits<double>::infinity();
      // a non-positive prediction only happens at rounding level
      const double rho = pred > 0 ? actual / pred : (actual > 0 ? 1.0 : -std::numeric_limits<double>::infinity());
      if (rho < cfg.rho_a) {
        if (sn > 0) radius = sn / 4.0;
      } else if (rho > cfg.rho_b && std::abs(sn - radius) <= 1e-12 * radius) {
        radius = std::min(cfg.delta_max, 2.0 * radius);
      }
      if (rho > cfg.rho_a) {
        accepted = true;
        double w = 0.9 * t.norm * t.norm / (fnorm * fnorm);
        if (t.norm > 0) w = std::max(w, res.eta / (2.0 * t.norm));
        omega = std::min(w, cfg.omega_max);
        cur = std::move(t);
      } else if (at_floor) {
        res.trace.entries.back().step_scale = 0.0;
        return finish(NewtonStatus::rounding_floor);
      }
    } else if (cfg.method == GlobalMethod::line_search) {
      const double ws = 0.9 * omega * omega;
      double tau = 1.0, wloc = dir.omega;
      const double fjd = dot(dir.f, dir.lin) - dot(dir.f, dir.f);  // f . J delta
      for (int trial = 0; trial < cfg.max_backtracks; ++trial) {
        Trial t = evaluate(p, add_step(cur.u, delta, tau));
        if (t.ok && t.norm <= (1.0 - cfg.armijo_t * (1.0 - wloc)) * fnorm) {
          accepted = true;
          step_scale = tau;
          double w = 0.9 * t.norm * t.norm / (fnorm * fnorm);
          if (ws > 0.1) w = std::max(w, ws);
          if (t.norm > 0) w = std::max(w, res.eta / (2.0 * t.norm));
          omega = std::min(w, cfg.omega_max);
          cur = std::move(t);
          break;
        }
        const double dg0 = tau * fjd / fnorm;
        const double gamma = backtrack_factor(fnorm, dg0, t.norm, cfg.gamma_min, cfg.gamma_max);
        tau *= gamma;
        wloc = 1.0 - gamma * (1.0 - wloc);
      }
      if (!accepted) {
        res.trace.entries.back().step_scale = tau;
        return finish(at_floor ? NewtonStatus::rounding_floor : NewtonStatus::backtracking_failed);
      }
    } else {
      const double w = dir.omega;
      double mu = theta_h_prev >= 0.0 ? contravariant_prediction(w, theta_h_prev) : cfg.mu0;
      bool reducted = false;
      Trial t;
      double theta = 0.0, h = 0.0;
      for (;;) {
        if (mu < cfg.mu_min) {
          res.trace.entries.back().step_scale = mu;
          return finish(at_floor ? NewtonStatus::rounding_floor : NewtonStatus::regularity_failed);
        }
        t = evaluate(p, add_step(cur.u, delta, mu));
        if (!t.ok) {
          // no contraction measurable: treat as a failed trial and damp
          mu /= 2.0;
          reducted = true;
          continue;
        }
        theta = t.norm / fnorm;
        const std::size_t m = std::max(t.g.size(), std::max(cur.g.size(), dir.lin.size()));
        const auto fh = padded(t.g, m), f0 = padded(cur.g, m), r = padded(dir.lin, m);
        std::vector<double> d(m);
        for (std::size_t i = 0; i < m; ++i) d[i] = fh[i] - (1.0 - mu) * f0[i] - mu * r[i];
        h = 2.0 * norm2(d) / (mu * mu * (1.0 - w * w) * fnorm);
        if (theta >= 1.0 - mu / 4.0) {
          mu = h > 0 ? std::min(1.0 / ((1.0 + w) * h), mu / 2.0) : mu / 2.0;
          reducted = true;
        } else {
          const double mu_hat = h > 0 ? std::min(1.0, 1.0 / ((1.0 + w) * h)) : 1.0;
          if (mu_hat >= 4.0 * mu && !reducted) {
            mu = mu_hat;
          } else {
            break;
          }
        }
      }
      accepted = true;
      step_scale = mu;
      theta_h_prev = theta * h;
      omega = contravariant_forcing(theta, w, cfg.rho, cfg.omega_min, cfg.omega_max);
      cur = std::move(t);
    }

    res.trace.entries.back().step_scale = step_scale;
    if (accepted) {
      ++res.accepted_steps;
      res.outer_residuals.push_back(cur.norm);
    }
  }
}

}  // namespace usn
