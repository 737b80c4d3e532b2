// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/almostbanded.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace usn {

enum class Precision { full, reduced };

Precision parse_precision(const std::string& name);
std::string to_string(Precision p);

/// r = clamp(round(n / 100), 20, 150).
std::size_t restart_rule(std::size_t n);

struct GmresConfig {
  std::size_t restart = 20;
  std::size_t max_cycles = 50;
  double forcing = 0.1;  // omega in [0, 1)
  Precision precision = Precision::full;
  /// Run at least one iteration from a starting guess that already meets the
  /// target, so the new unknowns of an enlarged system are touched.
  bool iterate_from_guess = false;

  void validate() const;
};

enum class GmresStatus { converged, breakdown, stagnated, max_cycles };
std::string to_string(GmresStatus s);

struct GmresResult {
  std::vector<double> delta;     // solution of A delta = b
  std::vector<double> residual;  // b - A delta, recomputed in double
  double residual_norm = 0.0;
  double rhs_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t cycles = 0;
  GmresStatus status = GmresStatus::max_cycles;
  bool reduced = false;      // inner cycles ran in single precision
  bool fell_back = false;    // reduced attempt failed and was redone in double
  std::vector<double> history;  // estimated residual norm per iteration

  bool converged() const noexcept { return status == GmresStatus::converged; }
};

template <typename Real>
using MatVec = std::function<void(std::span<const Real>, std::span<Real>)>;

/// Matrix-vector products of one linear system in both precisions.
/// `apply_float` may be empty, in which case reduced mode runs in double.
struct LinearOperator {
  std::size_t n = 0;
  MatVec<double> apply_double;
  MatVec<float> apply_float;
};

/// Solves with a right preconditioner W in both precisions, in place.
struct Preconditioner {
  std::size_t n = 0;
  std::function<void(std::span<double>)> solve_double;
  std::function<void(std::span<float>)> solve_float;

  /// Wraps `w` by reference; `w` must outlive the result.
  static Preconditioner wrap(const RightPreconditioner& w);
};

/// Restarted right-preconditioned GMRES for A delta = b.
///
/// Each cycle starts from the true residual computed in double and builds a
/// Krylov space of A W^{-1} with modified Gram-Schmidt, in single precision
/// when cfg.precision is reduced. The solution and residual are kept in
/// double. Converged means ||b - A delta|| <= omega ||b|| on the true system.
/// In reduced mode a solve with omega < 1e-6, or one that does not converge,
/// is redone once in double. `x0`, when given, is the starting guess.
GmresResult gmres_solve(const LinearOperator& a, const RightPreconditioner& w,
                        std::span<const double> b, const GmresConfig& cfg,
                        std::span<const double> x0 = {});

GmresResult gmres_solve(const LinearOperator& a, const Preconditioner& w,
                        std::span<const double> b, const GmresConfig& cfg,
                        std::span<const double> x0 = {});

}  // namespace usn
