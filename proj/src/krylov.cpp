// SPDX-License-Identifier: Apache-2.0
#include "usn/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace usn {

Precision parse_precision(const std::string& name) {
  if (name == "full" || name == "double") return Precision::full;
  if (name == "reduced" || name == "single" || name == "mixed") return Precision::reduced;
  throw std::invalid_argument("unknown precision mode: " + name);
}

std::string to_string(Precision p) { return p == Precision::full ? "full" : "reduced"; }

std::string to_string(GmresStatus s) {
  switch (s) {
    case GmresStatus::converged: return "converged";
    case GmresStatus::breakdown: return "breakdown";
    case GmresStatus::stagnated: return "stagnated";
    case GmresStatus::max_cycles: return "max_cycles";
  }
  return "unknown";
}

std::size_t restart_rule(std::size_t n) {
  if (n < 1) throw std::invalid_argument("restart_rule: n must be positive");
  const auto r = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 100.0));
  return std::clamp<std::size_t>(r, 20, 150);
}

void GmresConfig::validate() const {
  if (restart < 1) throw std::invalid_argument("GmresConfig: restart must be at least 1");
  if (max_cycles < 1) throw std::invalid_argument("GmresConfig: max_cycles must be at least 1");
  if (!(forcing >= 0.0 && forcing < 1.0)) {
    throw std::invalid_argument("GmresConfig: forcing term must lie in [0, 1)");
  }
}

Preconditioner Preconditioner::wrap(const RightPreconditioner& w) {
  Preconditioner p;
  p.n = w.size();
  p.solve_double = [&w](std::span<double> b) { w.solve_in_place<double>(b); };
  p.solve_float = [&w](std::span<float> b) { w.solve_in_place<float>(b); };
  return p;
}

namespace {

template <typename Real>
void precondition(const Preconditioner& w, std::span<Real> z) {
  if constexpr (std::is_same_v<Real, float>) {
    w.solve_float(z);
  } else {
    w.solve_double(z);
  }
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

struct CycleOutcome {
  std::size_t iterations = 0;
  bool breakdown = false;
};

// One GMRES cycle on A W^{-1} t = r; returns W^{-1} t added into delta.
template <typename Real>
CycleOutcome gmres_cycle(const MatVec<Real>& apply, const Preconditioner& w,
                         const std::vector<double>& r, double target, double bnorm,
                         std::size_t m, std::vector<double>& delta, std::vector<double>& history) {
  const std::size_t n = r.size();
  std::vector<Real> v((m + 1) * n), z(n), hcol(m + 1);
  std::vector<Real> h((m + 1) * m, Real(0));  // column-major, h[j * (m + 1) + i]
  std::vector<Real> cs(m), sn(m), g(m + 1, Real(0));
  const double beta = norm2(r);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<Real>(r[i] / beta);
  g[0] = static_cast<Real>(beta);

  CycleOutcome out;
  std::size_t k = 0;
  while (k < m) {
    const Real* vk = v.data() + k * n;
    std::copy(vk, vk + n, z.begin());
    precondition<Real>(w, std::span<Real>(z));
    Real* wk = v.data() + (k + 1) * n;
    apply(std::span<const Real>(z), std::span<Real>(wk, n));
    Real* hk = h.data() + k * (m + 1);
    for (std::size_t i = 0; i <= k; ++i) {
      const Real* vi = v.data() + i * n;
      hk[i] = dot(wk, vi, n);
      for (std::size_t t = 0; t < n; ++t) wk[t] -= hk[i] * vi[t];
    }
    Real hn = std::sqrt(dot(wk, wk, n));
    hk[k + 1] = hn;
    const bool lucky = !(static_cast<double>(hn) >= 1e-14 * bnorm);
    if (!lucky) {
      for (std::size_t t = 0; t < n; ++t) wk[t] /= hn;
    }
    for (std::size_t i = 0; i < k; ++i) {
      const Real a = hk[i], b = hk[i + 1];
      hk[i] = cs[i] * a + sn[i] * b;
      hk[i + 1] = -sn[i] * a + cs[i] * b;
    }
    const Real den = std::hypot(hk[k], hk[k + 1]);
    cs[k] = den == Real(0) ? Real(1) : hk[k] / den;
    sn[k] = den == Real(0) ? Real(0) : hk[k + 1] / den;
    hk[k] = den;
    hk[k + 1] = 0;
    g[k + 1] = -sn[k] * g[k];
    g[k] = cs[k] * g[k];
    ++k;
    const double est = std::abs(static_cast<double>(g[k]));
    history.push_back(est);
    if (lucky) {
      out.breakdown = true;
      break;
    }
    if (est <= target) break;
  }
  out.iterations = k;

  // back substitution for y, then theta = V y
  std::vector<Real> y(k);
  for (std::size_t i = k; i-- > 0;) {
    Real s = g[i];
    for (std::size_t j = i + 1; j < k; ++j) s -= h[j * (m + 1) + i] * y[j];
    const Real d = h[i * (m + 1) + i];
    y[i] = d != Real(0) ? s / d : Real(0);
  }
  std::vector<Real> theta(n, Real(0));
  for (std::size_t j = 0; j < k; ++j) {
    const Real* vj = v.data() + j * n;
    for (std::size_t t = 0; t < n; ++t) theta[t] += y[j] * vj[t];
  }
  // recover the update in double
  std::vector<double> upd(theta.begin(), theta.end());
  precondition<double>(w, std::span<double>(upd));
  for (std::size_t t = 0; t < n; ++t) delta[t] += upd[t];
  return out;
}

GmresResult run(const LinearOperator& a, const Preconditioner& w, std::span<const double> b,
                const GmresConfig& cfg, std::span<const double> x0, bool reduced) {
  const std::size_t n = b.size();
  GmresResult res;
  res.reduced = reduced;
  res.delta.assign(n, 0.0);
  res.residual.assign(b.begin(), b.end());
  res.rhs_norm = norm2(b);
  const double target = cfg.forcing * res.rhs_norm;
  std::vector<double> ad(n);
  if (!x0.empty()) {
    std::copy(x0.begin(), x0.end(), res.delta.begin());
    a.apply_double(res.delta, ad);
    for (std::size_t i = 0; i < n; ++i) res.residual[i] = b[i] - ad[i];
  }
  res.residual_norm = norm2(res.residual);
  const bool force = cfg.iterate_from_guess && !x0.empty() && res.residual_norm > 0.0;
  if ((res.residual_norm <= target && !force) || res.rhs_norm == 0.0) {
    if (res.rhs_norm == 0.0) std::fill(res.delta.begin(), res.delta.end(), 0.0);
    res.status = GmresStatus::converged;
    return res;
  }
  const std::size_t m = std::min(cfg.restart, n);
  int slow_cycles = 0;
  bool broke = false;
  res.status = GmresStatus::max_cycles;
  for (std::size_t cycle = 0; cycle < cfg.max_cycles; ++cycle) {
    const double before = res.residual_norm;
    CycleOutcome oc;
    if (reduced) {
      oc = gmres_cycle<float>(a.apply_float, w, res.residual, target, res.rhs_norm, m, res.delta,
                              res.history);
    } else {
      oc = gmres_cycle<double>(a.apply_double, w, res.residual, target, res.rhs_norm, m, res.delta,
                               res.history);
    }
    res.iterations += oc.iterations;
    res.cycles = cycle + 1;
    a.apply_double(res.delta, ad);
    for (std::size_t i = 0; i < n; ++i) res.residual[i] = b[i] - ad[i];
    res.residual_norm = norm2(res.residual);
    if (res.residual_norm <= target) {
      res.status = GmresStatus::converged;
      return res;
    }
    if (oc.breakdown) {
      // an invariant subspace was found; a second breakdown in a row means no progress is possible
      if (broke) {
        res.status = GmresStatus::breakdown;
        return res;
      }
      broke = true;
    } else {
      broke = false;
    }
    slow_cycles = res.residual_norm > (1.0 - 1e-3) * before ? slow_cycles + 1 : 0;
    if (slow_cycles >= 2) {
      res.status = GmresStatus::stagnated;
      return res;
    }
  }
  return res;
}

}  // namespace

GmresResult gmres_solve(const LinearOperator& a, const RightPreconditioner& w,
                        std::span<const double> b, const GmresConfig& cfg,
                        std::span<const double> x0) {
  return gmres_solve(a, Preconditioner::wrap(w), b, cfg, x0);
}

GmresResult gmres_solve(const LinearOperator& a, const Preconditioner& w,
                        std::span<const double> b, const GmresConfig& cfg,
                        std::span<const double> x0) {
  cfg.validate();
  if (b.size() != a.n || w.n != a.n) throw std::invalid_argument("gmres_solve: size mismatch");
  if (!x0.empty() && x0.size() != a.n) throw std::invalid_argument("gmres_solve: x0 size mismatch");
  if (!a.apply_double) throw std::invalid_argument("gmres_solve: missing double matvec");
  if (!w.solve_double) throw std::invalid_argument("gmres_solve: missing double preconditioner");
  const bool can_reduce = cfg.precision == Precision::reduced && static_cast<bool>(a.apply_float) &&
                          static_cast<bool>(w.solve_float);
  if (can_reduce && cfg.forcing >= 1e-6) {
    GmresResult r = run(a, w, b, cfg, x0, true);
    if (r.converged()) return r;
    GmresResult full = run(a, w, b, cfg, x0, false);
    full.fell_back = true;
    full.iterations += r.iterations;
    return full;
  }
  GmresResult r = run(a, w, b, cfg, x0, false);
  r.fell_back = can_reduce;
  return r;
}

}  // namespace usn
