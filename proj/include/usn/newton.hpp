// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/chebfun.hpp"
#include "usn/krylov.hpp"
#include "usn/problems.hpp"
#include "usn/ultraops.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace usn {

/// Globalization applied after each inexact Newton direction.
enum class GlobalMethod { trust_region_dogleg, line_search, trust_region_contravariant };

/// Accepts trd, lsb, trc.
GlobalMethod parse_method(const std::string& name);
std::string to_string(GlobalMethod m);

/// Resolution test on a Newton correction.
struct PlateauRule {
  std::size_t min_length = 8;
  double tail_fraction = 0.25;
  double floor = 1e-10;        // tail max below floor * reference -> resolved
  double flat_below = 1e-8;    // a flat tail counts only below this relative level
  double flat_slope = -0.05;   // least-squares slope of ln|c| per index
};

struct NewtonConfig {
  GlobalMethod method = GlobalMethod::trust_region_contravariant;
  double eta_r = 1e-14;
  /// Initial forcing term; negative means the method default
  /// (0.1 dogleg, 0.01 line search, 1e-3 contravariant).
  double omega0 = -1.0;
  double omega_max = 0.1;
  std::size_t max_outer = 200;
  int max_doublings = 12;
  std::size_t max_size = std::size_t{1} << 19;
  Precision precision = Precision::full;
  std::size_t restart = 0;  // 0 -> restart_rule(n)
  std::size_t max_cycles = 50;
  PlateauRule plateau;
  /// Measure the plateau relative to the iterate as well as the correction.
  bool plateau_uses_iterate = true;
  // dogleg
  double delta0 = 0.1;
  double delta_max = 100.0;
  double rho_a = 0.25;
  double rho_b = 0.75;
  // line search
  double armijo_t = 1e-4;
  int max_backtracks = 10;
  double gamma_min = 0.1;
  double gamma_max = 0.5;
  // contravariant
  double mu_min = 1e-6;
  double mu0 = 0.1;
  double rho = 0.9;
  double omega_min = 1e-5;
  /// A globalization failure with max |delta| below this multiple of max |u|
  /// means the residual sits at its rounding floor.
  double rounding_step = 1e-13;
  /// Record the coefficient error against the closed form when one exists.
  bool track_error = true;

  double initial_forcing() const;
  void validate() const;
};

/// One intermediate iteration. `phase` is "outer" for the first intermediate
/// iteration of an outer step and "intermediate" otherwise.
struct TraceEntry {
  std::size_t k = 0;
  std::size_t intermediate_index = 0;  // running count over the whole solve
  std::size_t n = 0;
  double residual = 0.0;  // ||G(u^k)||
  double error = std::numeric_limits<double>::quiet_NaN();
  std::size_t length = 0;  // length of u^k chopped at kChopTol
  double omega = 0.0;
  double step_scale = std::numeric_limits<double>::quiet_NaN();  // set on the last entry of step k
  std::size_t gmres_iterations = 0;
  std::string phase;
};

struct NewtonTrace {
  std::vector<TraceEntry> entries;
  std::string to_json() const;
};

/// `rounding_floor`: the stopping rule was not met, but the globalization
/// failed on a correction below rounding level; counted as converged.
enum class NewtonStatus {
  converged,
  rounding_floor,
  max_outer,
  backtracking_failed,
  regularity_failed,
  resolution_failed,
  domain_error,
};
std::string to_string(NewtonStatus s);

struct NewtonResult {
  ChebSeries solution;     // unchopped, so boundary rows hold to rounding
  std::size_t length = 0;  // length after chopping at kChopTol
  NewtonStatus status = NewtonStatus::max_outer;
  double residual = 0.0;          // ||G(u)|| of the returned solution
  double initial_residual = 0.0;  // ||G(u^0)||
  double eta = 0.0;               // stopping threshold
  double error = std::numeric_limits<double>::quiet_NaN();
  std::size_t outer_iterations = 0;
  std::size_t accepted_steps = 0;
  std::size_t intermediate_iterations = 0;
  std::size_t gmres_iterations = 0;
  std::vector<double> outer_residuals;  // ||G(u^k)|| for k = 0, 1, ...
  double seconds = 0.0;
  NewtonTrace trace;

  bool converged() const noexcept {
    return status == NewtonStatus::converged || status == NewtonStatus::rounding_floor;
  }
};

/// Lowest-degree polynomial satisfying the boundary conditions, from the
/// N x N system of boundary functionals on T_0..T_{N-1}.
ChebSeries initial_iterate(const Problem& p);

/// n = max(N + max_lambda(d^lambda - lambda), d_F + 1), at least N + 2.
std::size_t initial_size(const OperatorSpec& op, std::size_t residual_length);

/// True when the trailing coefficients have reached a floor. `scale`, when
/// positive, raises the reference magnitude above max |delta|.
bool plateau_detected(std::span<const double> delta, const PlateauRule& rule = {}, double scale = 0.0);

/// Positive nu with ||c + nu (d - c)|| = radius, for ||c|| < radius.
double dogleg_fraction(std::span<const double> cauchy, std::span<const double> newton, double radius);

/// Minimizer on [lo, hi] of the quadratic with p(0) = g0, p'(0) = dg0, p(1) = g1.
double backtrack_factor(double g0, double dg0, double g1, double lo, double hi);

/// min(1, 1 / ((1 + omega) theta h)), or 1 when theta h vanishes.
double contravariant_prediction(double omega, double theta_h);

/// Forcing term from the a posteriori Kantorovich estimate, clamped to
/// [omega_min, omega_max].
double contravariant_forcing(double theta, double omega, double rho, double omega_min,
                             double omega_max);

/// Solves F(u) = 0 from `u0` (or initial_iterate) with inexact Newton-GMRES.
NewtonResult solve(const Problem& p, const NewtonConfig& cfg,
                   const std::optional<ChebSeries>& u0 = std::nullopt);

}  // namespace usn
