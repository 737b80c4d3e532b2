// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/chebfun.hpp"
#include "usn/krylov.hpp"
#include "usn/newton.hpp"
#include "usn/problems.hpp"

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace usn {

/// A point on the solution path of F(u; eps) = 0.
struct PathPoint {
  ChebSeries solution;
  double eps = 0.0;
  std::vector<double> tangent_u;  // coefficient part of the unit tangent
  double tangent_eps = 0.0;
  double step = 0.0;              // arclength step h_s that produced the next prediction
  double residual = 0.0;          // ||G|| after correction
  std::size_t corrector_iterations = 0;
  std::size_t length = 0;         // chopped length
  double seconds = 0.0;           // time spent obtaining this point
};

struct ContinuationConfig {
  double start_eps = 5e-2;
  double target_eps = 5e-5;
  double corrector_tol = 1e-3;
  /// Arclength of the first step; 0 picks the step whose prediction halves eps.
  double initial_step = 0.0;
  double min_step = 1e-10;
  double max_step = 1e3;
  double shrink = 0.5;
  double grow = 1.5;
  int failures_to_shrink = 3;        // non-contracting corrector iterations before h_s is halved
  int successes_to_grow = 2;         // consecutive one-iteration corrections before h_s grows
  std::size_t max_corrector = 10;
  /// A prediction is accepted without a corrector iteration only when its
  /// residual is below this; otherwise at least one Newton step re-resolves it.
  double on_path_tol = 1e-12;
  std::size_t max_points = 200;
  /// A prediction below the target halves h_s; the path stops instead once
  /// the current eps is within this relative gap of the target.
  double close_gap = 0.05;
  double start_eta_r = 1e-6;         // loose solve at the start value
  double omega = 1e-2;               // forcing for the bordered solves
  /// Relative truncation of intermediate iterates; they only need corrector
  /// accuracy, and the finer tail is rounding noise from the loose solves.
  double path_chop = 1e-8;
  Precision path_precision = Precision::reduced;
  NewtonConfig final_solve;          // the high-accuracy solve at the target
  std::map<std::string, double> fixed;  // other problem parameters

  void validate() const;
};

enum class PathStatus { reached, step_underflow, start_failed, final_failed, max_points };
std::string to_string(PathStatus s);

struct PathResult {
  PathStatus status = PathStatus::reached;
  std::vector<PathPoint> points;  // accepted points, eps decreasing
  NewtonResult final;             // solve at the target from the last point
  double target_eps = 0.0;
  double seconds = 0.0;

  bool ok() const noexcept { return status == PathStatus::reached; }
  /// eps, length, time, corrector_iterations; the last row is the target solve
  /// with its outer iteration count.
  void write_csv(std::ostream& os) const;
};

/// Euler predictor (u, eps) + h_s (t_u, t_eps).
PathPoint predict(const PathPoint& point, double h);

/// Solves the bordered system [J, g; c^T, d] x = y at the size of `y` minus one
/// with preconditioned GMRES. `g` is dG/deps, `c` and `d` the border row.
/// Exposed for testing against a dense solve.
std::vector<double> bordered_solve(const Problem& p, const ChebSeries& u, std::span<const double> g,
                                   std::span<const double> c, double d, std::span<const double> y,
                                   double omega, Precision precision);

/// dG/deps at u by a central difference in the parameter (G is affine in eps
/// for every singularly perturbed problem in the bank).
std::vector<double> parameter_derivative(const std::string& name, const std::map<std::string, double>& fixed,
                                         const ChebSeries& u, double eps);

/// Traces the path from cfg.start_eps towards cfg.target_eps, stopping one
/// step before the target would be overshot, then solves at the target.
PathResult trace_path(const std::string& name, const ContinuationConfig& cfg);

}  // namespace usn
