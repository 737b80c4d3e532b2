// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/boundary.hpp"
#include "usn/chebfun.hpp"
#include "usn/ultraops.hpp"

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace usn {

/// u^(order)(endpoint) - value = 0 at the left (side = -1) or right (side = +1) end.
struct BoundaryCondition {
  int side = -1;
  int order = 0;
  double value = 0.0;
};

/// Pointwise rule in terms of x and d = (u, u', ..., u^(N)) at x.
using PointRule = std::function<double(double x, std::span<const double> d)>;

class UnknownProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One nonlinear BVP F(u) = 0 with N linear boundary conditions.
struct Problem {
  std::string name;
  std::string note;
  int order = 0;
  Interval domain;
  std::map<std::string, double> params;
  std::vector<BoundaryCondition> bcs;
  PointRule residual;                  // F
  std::vector<PointRule> coefficients;  // a^lambda of the Frechet derivative, lambda = 0..N
  std::function<double(double)> exact;  // closed-form solution, empty if none

  bool has_closed_form() const noexcept { return static_cast<bool>(exact); }
};

/// Names of the 17 registered problems in table order.
const std::vector<std::string>& problem_names();

/// Builds a problem with default parameters, overridden by `overrides`
/// (keys among eps, beta, L). Throws UnknownProblem or std::invalid_argument.
Problem make_problem(const std::string& name, const std::map<std::string, double>& overrides = {});

/// u, u', ..., u^(order).
std::vector<ChebSeries> derivatives(const ChebSeries& u, int order);

/// F(u) as a Chebyshev series, resolved relative to the size of its terms.
ChebSeries residual_function(const Problem& p, const ChebSeries& u);

/// u^(m)(endpoint) - value for each boundary condition.
std::vector<double> boundary_residuals(const Problem& p, const ChebSeries& u);

/// G(u) = [boundary residuals; C^(N) coefficients of F(u)], the vector whose
/// 2-norm the solver drives to zero. Its body is the right-hand side of the
/// Newton system before truncation.
std::vector<double> residual_vector(const Problem& p, const ChebSeries& u);

/// Converts T coefficients to C^(N) coefficients, same length.
std::vector<double> convert_to_ultraspherical(std::span<const double> t, int order);

/// Linearized boundary rows, including the domain scaling.
std::vector<BoundaryRow> boundary_rows(const Problem& p);

/// J[u] = sum a^lambda d^lambda/dx^lambda in the form used by the operators:
/// coefficient lambda is multiplied by (2 / (b - a))^lambda.
OperatorSpec frechet_operator(const Problem& p, const ChebSeries& u);

/// The closed form as a series on the problem domain; throws if none.
ChebSeries closed_form(const Problem& p);

}  // namespace usn
