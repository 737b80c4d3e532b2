// SPDX-License-Identifier: Apache-2.0
#include "usn/continuation.hpp"

#include "usn/almostbanded.hpp"
#include "usn/fastapply.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>

namespace usn {

void ContinuationConfig::validate() const {
  if (!(target_eps > 0.0)) throw std::invalid_argument("ContinuationConfig: target eps must be positive");
  if (!(start_eps >= target_eps)) throw std::invalid_argument("ContinuationConfig: need start eps >= target eps");
  if (!(corrector_tol > 0.0)) throw std::invalid_argument("ContinuationConfig: corrector tolerance must be positive");
  if (!(initial_step >= 0.0)) throw std::invalid_argument("ContinuationConfig: initial step must be non-negative");
  if (!(min_step > 0.0 && min_step < max_step)) throw std::invalid_argument("ContinuationConfig: need 0 < min_step < max_step");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("ContinuationConfig: shrink must lie in (0, 1)");
  if (!(grow >= 1.0)) throw std::invalid_argument("ContinuationConfig: grow must be at least 1");
  if (failures_to_shrink < 1 || successes_to_grow < 1) {
    throw std::invalid_argument("ContinuationConfig: step counters must be positive");
  }
  if (!(omega > 0.0 && omega < 1.0)) throw std::invalid_argument("ContinuationConfig: omega must lie in (0, 1)");
  if (!(path_chop >= 0.0 && path_chop < corrector_tol)) throw std::invalid_argument("ContinuationConfig: need 0 <= path_chop < corrector_tol");
  if (!(close_gap >= 0.0)) throw std::invalid_argument("ContinuationConfig: close_gap must be non-negative");
  if (fixed.count("eps")) throw std::invalid_argument("ContinuationConfig: eps is the path parameter");
  final_solve.validate();
}

std::string to_string(PathStatus s) {
  switch (s) {
    case PathStatus::reached: return "reached";
    case PathStatus::step_underflow: return "step-underflow";
    case PathStatus::start_failed: return "start-failed";
    case PathStatus::final_failed: return "final-solve-failed";
    case PathStatus::max_points: return "max-points";
  }
  return "unknown";
}

void PathResult::write_csv(std::ostream& os) const {
  os << "eps,length,time,corrector_iterations\n";
  for (const auto& p : points) {
    os << p.eps << ',' << p.length << ',' << p.seconds << ',' << p.corrector_iterations << '\n';
  }
  if (final.solution.length() > 0) {
    os << target_eps << ',' << final.length << ',' << final.seconds << ',' << final.outer_iterations << '\n';
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

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

std::vector<double> padded(std::span<const double> v, std::size_t n) {
  std::vector<double> out(n, 0.0);
  std::copy_n(v.begin(), std::min(n, v.size()), out.begin());
  return out;
}

template <typename To, typename From>
std::vector<To> cast(const std::vector<From>& v) {
  return std::vector<To>(v.begin(), v.end());
}

Problem at_eps(const std::string& name, const std::map<std::string, double>& fixed, double eps) {
  auto o = fixed;
  o["eps"] = eps;
  return make_problem(name, o);
}

// [J g; c^T d] at a fixed size n, with W bordered by the same row and column.
class Bordered {
 public:
  Bordered(const Problem& p, const OperatorSpec& op, std::size_t n, std::span<const double> g,
           std::span<const double> c, double d, Precision precision)
      : n_(n), rows_(boundary_rows(p)), jd_(op, rows_, n), w_(RightPreconditioner::build(op, rows_, n, bandwidth_rule(n))),
        g_(padded(g, n)), c_(padded(c, n)), d_(d) {
    if (precision == Precision::reduced) jf_ = std::make_unique<JacobianApplicator<float>>(op, rows_, n);
    // Schur complement of W in the bordered preconditioner
    a_ = g_;
    w_.solve_in_place<double>(std::span<double>(a_));
    schur_ = d_ - dot(c_, a_);
    if (schur_ == 0.0 || !std::isfinite(schur_)) schur_ = d_ != 0.0 ? d_ : 1.0;
    gf_ = cast<float>(g_);
    cf_ = cast<float>(c_);
    af_ = cast<float>(a_);
  }

  LinearOperator op() const {
    LinearOperator lop;
    lop.n = n_ + 1;
    lop.apply_double = [this](std::span<const double> x, std::span<double> y) { apply<double>(jd_, g_, c_, x, y); };
    if (jf_) {
      lop.apply_float = [this](std::span<const float> x, std::span<float> y) { apply<float>(*jf_, gf_, cf_, x, y); };
    }
    return lop;
  }

  Preconditioner preconditioner() const {
    Preconditioner pc;
    pc.n = n_ + 1;
    pc.solve_double = [this](std::span<double> y) { precondition<double>(c_, a_, y); };
    pc.solve_float = [this](std::span<float> y) { precondition<float>(cf_, af_, y); };
    return pc;
  }

 private:
  template <typename Real>
  void apply(const JacobianApplicator<Real>& j, const std::vector<Real>& g, const std::vector<Real>& c,
             std::span<const Real> x, std::span<Real> y) const {
    const auto xu = x.first(n_);
    const Real xe = x[n_];
    auto yu = y.first(n_);
    j.apply(xu, yu);
    Real s = static_cast<Real>(d_) * xe;
    for (std::size_t i = 0; i < n_; ++i) {
      yu[i] += g[i] * xe;
      s += c[i] * xu[i];
    }
    y[n_] = s;
  }

  template <typename Real>
  void precondition(const std::vector<Real>& c, const std::vector<Real>& a, std::span<Real> y) const {
    auto yu = y.first(n_);
    w_.solve_in_place<Real>(yu);
    Real s = y[n_];
    for (std::size_t i = 0; i < n_; ++i) s -= c[i] * yu[i];
    const Real xe = s / static_cast<Real>(schur_);
    for (std::size_t i = 0; i < n_; ++i) yu[i] -= a[i] * xe;
    y[n_] = xe;
  }

  std::size_t n_;
  std::vector<BoundaryRow> rows_;
  JacobianApplicator<double> jd_;
  std::unique_ptr<JacobianApplicator<float>> jf_;
  RightPreconditioner w_;
  std::vector<double> g_, c_, a_;
  std::vector<float> gf_, cf_, af_;
  double d_ = 0.0;
  double schur_ = 1.0;
};

GmresResult solve_bordered_at(const Problem& p, const OperatorSpec& op, std::size_t n, std::span<const double> g,
                              std::span<const double> c, double d, std::span<const double> y, double omega,
                              Precision precision, std::span<const double> warm) {
  const Bordered sys(p, op, n, g, c, d, precision);
  GmresConfig gc;
  gc.restart = restart_rule(n + 1);
  gc.max_cycles = 50;
  gc.forcing = omega;
  gc.precision = precision;
  gc.iterate_from_guess = !warm.empty();
  return gmres_solve(sys.op(), sys.preconditioner(), y, gc, warm);
}

// Bordered solve with the same doubling and plateau test as the Newton
// intermediate loop. `y_u` is padded to each trial size; returns (x_u, x_eps).
struct BorderedSolution {
  bool resolved = false;
  std::vector<double> xu;
  double xe = 0.0;
};

BorderedSolution solve_bordered_adaptive(const Problem& p, const ChebSeries& u, std::span<const double> g,
                                         std::span<const double> c, double d, std::span<const double> yu,
                                         double ye, double omega, Precision precision, double scale,
                                         const NewtonConfig& ncfg) {
  const OperatorSpec op = frechet_operator(p, u);
  const std::size_t nbc = boundary_rows(p).size();
  const std::size_t body = std::max(yu.size(), g.size());
  std::size_t n = initial_size(op, body > nbc ? body - nbc : 0);
  if (!c.empty()) n = std::max(n, chop_coeffs(c, 0.0).size());
  n = std::max(n, body);
  std::vector<double> warm;
  BorderedSolution out;
  for (int doubling = 0;; ++doubling) {
    std::vector<double> y = padded(yu, n + 1);
    y[n] = ye;
    if (!warm.empty()) {
      // keep the eps component in the last slot
      const double we = warm.back();
      warm.pop_back();
      warm.resize(n, 0.0);
      warm.push_back(we);
    }
    GmresResult r = solve_bordered_at(p, op, n, g, c, d, y, omega, precision, warm);
    const std::span<const double> xu(r.delta.data(), n);
    const bool plateau = plateau_detected(xu, ncfg.plateau, scale);
    if (plateau || doubling >= ncfg.max_doublings || 2 * n > ncfg.max_size) {
      out.resolved = plateau;
      double m = 0.0;
      for (double v : xu) m = std::max(m, std::abs(v));
      out.xu = chop_coeffs(xu, kChopTol * m);
      out.xe = r.delta[n];
      return out;
    }
    warm = std::move(r.delta);
    n *= 2;
  }
}

// Unit tangent at (u, eps), oriented by the previous tangent through the border row.
bool tangent_at(const std::string& name, const ContinuationConfig& cfg, PathPoint& pt,
                std::span<const double> old_u, double old_e) {
  const Problem p = at_eps(name, cfg.fixed, pt.eps);
  const auto ge = parameter_derivative(name, cfg.fixed, pt.solution, pt.eps);
  const auto s = solve_bordered_adaptive(p, pt.solution, ge, old_u, old_e, {}, 1.0, cfg.omega * 1e-2,
                                         cfg.path_precision, 0.0, cfg.final_solve);
  if (!s.resolved) return false;
  const double nrm = std::hypot(norm2(s.xu), s.xe);
  if (!(nrm > 0.0) || !std::isfinite(nrm)) return false;
  pt.tangent_u = s.xu;
  for (double& v : pt.tangent_u) v /= nrm;
  pt.tangent_eps = s.xe / nrm;
  return true;
}

struct Correction {
  bool ok = false;
  PathPoint point;
};

// Newton on [G(u, eps); t . (z - z0) - h] from the prediction.
Correction correct(const std::string& name, const ContinuationConfig& cfg, const PathPoint& from, double h) {
  Correction out;
  PathPoint z = predict(from, h);
  z.solution = chop(z.solution, cfg.path_chop);
  double prev = std::numeric_limits<double>::infinity();
  int stalls = 0;
  for (std::size_t it = 0;; ++it) {
    if (!(z.eps > 0.0)) return out;
    const Problem p = at_eps(name, cfg.fixed, z.eps);
    std::vector<double> g;
    double nrm = 0.0;
    try {
      g = residual_vector(p, z.solution);
      nrm = norm2(g);
    } catch (const DomainError&) {
      return out;
    } catch (const ResolutionError&) {
      return out;
    }
    if (!std::isfinite(nrm)) return out;
    if (nrm < cfg.corrector_tol && (it > 0 || nrm <= cfg.on_path_tol)) {
      z.residual = nrm;
      z.corrector_iterations = it;
      out.ok = true;
      out.point = std::move(z);
      return out;
    }
    stalls = nrm >= prev ? stalls + 1 : 0;
    if (stalls >= cfg.failures_to_shrink || it >= cfg.max_corrector) return out;
    prev = nrm;

    // arclength row residual
    const auto& uc = z.solution.coeffs();
    const auto& u0 = from.solution.coeffs();
    const std::size_t m = std::max(uc.size(), u0.size());
    const auto du = padded(uc, m), d0 = padded(u0, m);
    std::vector<double> diff(m);
    for (std::size_t i = 0; i < m; ++i) diff[i] = du[i] - d0[i];
    const double s = dot(from.tangent_u, diff) + from.tangent_eps * (z.eps - from.eps) - h;

    const auto ge = parameter_derivative(name, cfg.fixed, z.solution, z.eps);
    std::vector<double> rhs(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) rhs[i] = -g[i];
    BorderedSolution step;
    try {
      step = solve_bordered_adaptive(p, z.solution, ge, from.tangent_u, from.tangent_eps, rhs, -s, cfg.omega,
                                     cfg.path_precision, z.solution.max_abs_coeff(), cfg.final_solve);
    } catch (const DomainError&) {
      return out;
    }
    if (!step.resolved) return out;
    std::vector<double> c = padded(uc, std::max(uc.size(), step.xu.size()));
    for (std::size_t i = 0; i < step.xu.size(); ++i) c[i] += step.xu[i];
    z.solution = chop(ChebSeries(std::move(c), z.solution.domain()), cfg.path_chop);
    z.eps += step.xe;
  }
}

}  // namespace

PathPoint predict(const PathPoint& point, double h) {
  PathPoint z;
  const auto& c = point.solution.coeffs();
  std::vector<double> v = padded(c, std::max(c.size(), point.tangent_u.size()));
  for (std::size_t i = 0; i < point.tangent_u.size(); ++i) v[i] += h * point.tangent_u[i];
  z.solution = ChebSeries(chop_coeffs(v, 0.0), point.solution.domain());
  z.eps = point.eps + h * point.tangent_eps;
  return z;
}

std::vector<double> parameter_derivative(const std::string& name, const std::map<std::string, double>& fixed,
                                         const ChebSeries& u, double eps) {
  // the difference is exact for G affine in eps, so a wide stencil only limits rounding
  const double h = 0.25 * eps;
  const auto gp = residual_vector(at_eps(name, fixed, eps + h), u);
  const auto gm = residual_vector(at_eps(name, fixed, eps - h), u);
  const std::size_t m = std::max(gp.size(), gm.size());
  const auto a = padded(gp, m), b = padded(gm, m);
  std::vector<double> d(m);
  for (std::size_t i = 0; i < m; ++i) d[i] = (a[i] - b[i]) / (2.0 * h);
  return d;
}

std::vector<double> bordered_solve(const Problem& p, const ChebSeries& u, std::span<const double> g,
                                   std::span<const double> c, double d, std::span<const double> y,
                                   double omega, Precision precision) {
  if (y.size() < 2) throw std::invalid_argument("bordered_solve: system too small");
  const std::size_t n = y.size() - 1;
  const OperatorSpec op = frechet_operator(p, u);
  return solve_bordered_at(p, op, n, g, c, d, y, omega, precision, {}).delta;
}

PathResult trace_path(const std::string& name, const ContinuationConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  PathResult res;
  res.target_eps = cfg.target_eps;
  auto done = [&](PathStatus s) {
    res.status = s;
    res.seconds = seconds_since(t0);
    return res;
  };

  // start point from the trivial initial iterate
  {
    const auto ts = Clock::now();
    NewtonConfig nc = cfg.final_solve;
    nc.eta_r = cfg.start_eta_r;
    nc.precision = cfg.path_precision;
    nc.track_error = false;
    const NewtonResult r = solve(at_eps(name, cfg.fixed, cfg.start_eps), nc);
    if (!r.converged()) return done(PathStatus::start_failed);
    PathPoint s;
    s.solution = chop(r.solution, cfg.path_chop);
    s.eps = cfg.start_eps;
    s.residual = r.residual;
    s.corrector_iterations = r.outer_iterations;
    s.length = s.solution.length();
    if (cfg.start_eps > cfg.target_eps) {
      const std::vector<double> none;
      if (!tangent_at(name, cfg, s, none, -1.0)) return done(PathStatus::start_failed);
    }
    s.seconds = seconds_since(ts);
    res.points.push_back(std::move(s));
  }

  double h = cfg.initial_step;
  if (h == 0.0 && cfg.start_eps > cfg.target_eps) {
    const double te = res.points.back().tangent_eps;
    h = te < 0.0 ? 0.5 * cfg.start_eps / -te : cfg.min_step * 2;
  }
  h = std::min(h, cfg.max_step);
  int quick = 0;
  while (res.points.back().eps > cfg.target_eps) {
    const PathPoint& cur = res.points.back();
    if (cur.eps - cfg.target_eps <= cfg.close_gap * cfg.target_eps) break;
    if (res.points.size() >= cfg.max_points) return done(PathStatus::max_points);
    const auto ts = Clock::now();
    std::optional<PathPoint> next;
    while (!next) {
      if (h < cfg.min_step) return done(PathStatus::step_underflow);
      // a prediction past the target is shortened, never accepted
      if (predict(cur, h).eps <= cfg.target_eps) {
        h *= cfg.shrink;
        quick = 0;
        continue;
      }
      Correction c = correct(name, cfg, cur, h);
      if (!c.ok || c.point.eps <= cfg.target_eps) {
        h *= cfg.shrink;
        quick = 0;
        continue;
      }
      if (!tangent_at(name, cfg, c.point, cur.tangent_u, cur.tangent_eps)) {
        h *= cfg.shrink;
        quick = 0;
        continue;
      }
      next = std::move(c.point);
    }
    res.points.back().step = h;
    next->length = next->solution.length();
    next->seconds = seconds_since(ts);
    quick = next->corrector_iterations <= 1 ? quick + 1 : 0;
    res.points.push_back(std::move(*next));
    if (quick >= cfg.successes_to_grow) {
      h = std::min(h * cfg.grow, cfg.max_step);
      quick = 0;
    }
  }

  res.final = solve(at_eps(name, cfg.fixed, cfg.target_eps), cfg.final_solve, res.points.back().solution);
  if (!res.final.converged()) return done(PathStatus::final_failed);
  return done(PathStatus::reached);
}

}  // namespace usn
