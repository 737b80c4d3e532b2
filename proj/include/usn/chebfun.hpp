// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace usn {

/// Default relative threshold for trailing-coefficient removal.
inline constexpr double kChopTol = 1e-15;
/// Largest sampling grid tried before giving up: 2^17 + 1 points.
inline constexpr std::size_t kMaxGridSize = (std::size_t{1} << 17) + 1;

class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a sampled function returns a non-finite value, e.g. log of a
/// negative iterate. The Newton layer treats it as a rejected trial step.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed interval [a, b], affinely identified with [-1, 1].
struct Interval {
  double a = -1.0;
  double b = 1.0;

  double to_unit(double x) const noexcept { return (2.0 * x - a - b) / (b - a); }
  double from_unit(double t) const noexcept { return 0.5 * (a + b) + 0.5 * (b - a) * t; }
  /// d/dx = scale() * d/dt.
  double scale() const noexcept { return 2.0 / (b - a); }
  bool operator==(const Interval&) const = default;
};

/// Finite Chebyshev-T expansion of a function on an interval. Immutable.
class ChebSeries {
 public:
  ChebSeries() : coeffs_{0.0} {}
  explicit ChebSeries(std::vector<double> coeffs, Interval domain = {});

  static ChebSeries constant(double c, Interval domain = {}) { return ChebSeries({c}, domain); }
  /// The identity function x on the given interval.
  static ChebSeries identity(Interval domain = {});

  std::span<const double> coeffs() const noexcept { return coeffs_; }
  std::size_t length() const noexcept { return coeffs_.size(); }
  const Interval& domain() const noexcept { return domain_; }

  double operator()(double x) const;
  /// Largest coefficient magnitude.
  double max_abs_coeff() const noexcept;

 private:
  std::vector<double> coeffs_;
  Interval domain_;
};

struct BuildOptions {
  double tol = kChopTol;
  /// Reference magnitude for relative tests; the larger of this and the
  /// largest computed coefficient is used. Zero means "self-scaled".
  double vscale = 0.0;
  std::size_t min_size = 17;
  std::size_t max_size = kMaxGridSize;
};

/// Chebyshev points of the second kind, x_j = cos(pi j / (m - 1)), j = 0..m-1.
std::vector<double> chebyshev_points(std::size_t m);

/// Values of sum c_k T_k at the m Chebyshev points (m >= c.size(), m >= 2).
std::vector<double> values_on_grid(std::span<const double> coeffs, std::size_t m);

/// Chebyshev coefficients of the interpolant through values at chebyshev_points(m).
std::vector<double> coeffs_from_values(std::span<const double> values);

/// Clenshaw evaluation of sum c_k T_k(t) for t in [-1, 1].
double clenshaw(std::span<const double> coeffs, double t) noexcept;

double evaluate(const ChebSeries& u, double x);

ChebSeries build_from_function(const std::function<double(double)>& f, Interval domain,
                               const BuildOptions& opts = {});

/// x -> g(u(x)).
ChebSeries compose(const ChebSeries& u, const std::function<double(double)>& g,
                   const BuildOptions& opts = {});

/// x -> g(x, u_1(x), ..., u_k(x)) for series on a common domain.
using PointwiseFn = std::function<double(double x, std::span<const double> values)>;
ChebSeries compose(std::span<const ChebSeries* const> inputs, const PointwiseFn& g,
                   const BuildOptions& opts = {});
ChebSeries compose(std::initializer_list<const ChebSeries*> inputs, const PointwiseFn& g,
                   const BuildOptions& opts = {});

/// Shortest prefix whose dropped tail lies below tol * max|u_k|.
ChebSeries chop(const ChebSeries& u, double tol = kChopTol);
std::vector<double> chop_coeffs(std::span<const double> c, double threshold);

struct Term {
  double scale;
  const ChebSeries* series;
};
/// sum scale_i * series_i, chopped relative to the largest scaled input.
ChebSeries linear_combination(std::span<const Term> terms, double tol = kChopTol);
ChebSeries linear_combination(std::initializer_list<Term> terms, double tol = kChopTol);

/// d^order u / dx^order, represented in the T basis on the same domain.
ChebSeries derivative(const ChebSeries& u, int order = 1);

/// Coefficient dump: header `k,coeff`, 17 significant digits per value.
void write_coefficients_csv(std::ostream& os, std::span<const double> coeffs);
std::vector<double> read_coefficients_csv(std::istream& is);

}  // namespace usn
