// SPDX-License-Identifier: Apache-2.0
#include "usn/continuation.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace usn;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ContinuationConfig sawtooth_config(double target) {
  ContinuationConfig c;
  c.start_eps = 5e-2;
  c.target_eps = target;
  return c;
}

// one shared path to the desk-scale target, traced once
const PathResult& desk_path() {
  static const PathResult r = trace_path("sawtooth", sawtooth_config(7.59e-4));
  return r;
}

}  // namespace

TEST(Predictor, StepAlongNegativeEpsAxis) {
  PathPoint p;
  p.solution = ChebSeries({0.3, 0.1, -0.2});
  p.eps = 1.0;
  p.tangent_u = {0.0, 0.0, 0.0};
  p.tangent_eps = -1.0;
  const PathPoint z = predict(p, 0.1);
  EXPECT_DOUBLE_EQ(z.eps, 0.9);
  ASSERT_EQ(z.solution.length(), 3u);
  EXPECT_DOUBLE_EQ(z.solution.coeffs()[0], 0.3);
  EXPECT_DOUBLE_EQ(z.solution.coeffs()[1], 0.1);
  EXPECT_DOUBLE_EQ(z.solution.coeffs()[2], -0.2);
}

TEST(Predictor, LongerTangentExtendsSeries) {
  PathPoint p;
  p.solution = ChebSeries({1.0});
  p.eps = 0.5;
  p.tangent_u = {0.0, 0.0, 0.0, 0.6};
  p.tangent_eps = -0.8;
  const PathPoint z = predict(p, 0.5);
  EXPECT_DOUBLE_EQ(z.eps, 0.1);
  ASSERT_EQ(z.solution.length(), 4u);
  EXPECT_DOUBLE_EQ(z.solution.coeffs()[0], 1.0);
  EXPECT_DOUBLE_EQ(z.solution.coeffs()[3], 0.3);
}

TEST(ParameterDerivative, SawtoothIsSecondDerivative) {
  // dF/deps = u''; for u = x^3, u'' = 6x = 1.5 C^(2)_1 since C^(2)_1 = 4x
  const ChebSeries u({0.0, 0.75, 0.0, 0.25});
  const auto g = parameter_derivative("sawtooth", {}, u, 0.05);
  ASSERT_GE(g.size(), 4u);
  EXPECT_NEAR(g[0], 0.0, 1e-13);  // boundary rows do not depend on eps
  EXPECT_NEAR(g[1], 0.0, 1e-13);
  EXPECT_NEAR(g[2], 0.0, 1e-12);
  EXPECT_NEAR(g[3], 1.5, 1e-12);
  for (std::size_t i = 4; i < g.size(); ++i) EXPECT_NEAR(g[i], 0.0, 1e-12) << i;
}

TEST(BorderedSolve, AgreesWithDenseSolveAtSize64) {
  const Problem p = make_problem("sawtooth", {{"eps", 0.05}});
  const ChebSeries u({1.0, 0.2, 0.3, 0.0, -0.05});
  const std::size_t n = 64;
  std::mt19937_64 rng(881);
  const auto g = random_vector(rng, n);
  const auto c = random_vector(rng, n);
  const double d = 0.7;
  const auto y = random_vector(rng, n + 1);

  const auto x = bordered_solve(p, u, g, c, d, y, 1e-13, Precision::full);

  const auto rows = boundary_rows(p);
  const Eigen::MatrixXd j = dense_truncation(frechet_operator(p, u), rows, n);
  Eigen::MatrixXd m(n + 1, n + 1);
  m.topLeftCorner(n, n) = j;
  for (std::size_t i = 0; i < n; ++i) {
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = g[i];
    m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) = c[i];
  }
  m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = d;
  const Eigen::VectorXd ye = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n + 1));
  const Eigen::VectorXd ref = m.partialPivLu().solve(ye);
  ASSERT_EQ(x.size(), n + 1);
  const Eigen::VectorXd xe = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n + 1));
  EXPECT_LT((xe - ref).norm() / ref.norm(), 1e-8);
}

TEST(BorderedSolve, ReducedPrecisionMeetsLooseForcing) {
  const Problem p = make_problem("sawtooth", {{"eps", 0.05}});
  const ChebSeries u({1.0, 0.2, 0.3});
  const std::size_t n = 128;
  std::mt19937_64 rng(883);
  const auto g = random_vector(rng, n);
  const auto c = random_vector(rng, n);
  const auto y = random_vector(rng, n + 1);
  const auto x = bordered_solve(p, u, g, c, -1.0, y, 1e-3, Precision::reduced);
  const auto rows = boundary_rows(p);
  const Eigen::MatrixXd j = dense_truncation(frechet_operator(p, u), rows, n);
  Eigen::VectorXd r(n + 1);
  const Eigen::VectorXd xu = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
  r.head(static_cast<Eigen::Index>(n)) = j * xu;
  double last = -x[n];
  for (std::size_t i = 0; i < n; ++i) {
    r(static_cast<Eigen::Index>(i)) += g[i] * x[n] - y[i];
    last += c[i] * x[i];
  }
  r(static_cast<Eigen::Index>(n)) = last - y[n];
  EXPECT_LE(r.norm(), 1e-3 * norm(y) * (1 + 1e-9));
}

TEST(ContinuationConfig, Validation) {
  ContinuationConfig c;
  EXPECT_NO_THROW(c.validate());
  c.target_eps = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.target_eps = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.fixed["eps"] = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.path_chop = 1e-2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TracePath, TargetEqualToStartGivesSinglePoint) {
  ContinuationConfig c = sawtooth_config(5e-2);
  const PathResult r = trace_path("sawtooth", c);
  ASSERT_TRUE(r.ok()) << to_string(r.status);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_DOUBLE_EQ(r.points[0].eps, 5e-2);
  EXPECT_TRUE(r.final.converged());
  EXPECT_LE(r.final.residual, r.final.eta);
}

TEST(TracePath, FirstTangentMatchesFiniteDifference) {
  const PathResult& r = desk_path();
  ASSERT_FALSE(r.points.empty());
  const PathPoint& s = r.points.front();
  EXPECT_LT(s.tangent_eps, 0.0);
  EXPECT_NEAR(std::hypot(norm(s.tangent_u), s.tangent_eps), 1.0, 1e-12);
  // du/deps from two tight solves a small step apart
  NewtonConfig nc;
  const double e0 = 5e-2, e1 = 5e-2 * (1 - 1e-4);
  const auto a = solve(make_problem("sawtooth", {{"eps", e0}}), nc);
  const auto b = solve(make_problem("sawtooth", {{"eps", e1}}), nc);
  ASSERT_TRUE(a.converged() && b.converged());
  const std::size_t m = std::max({a.solution.length(), b.solution.length(), s.tangent_u.size()});
  double diff = 0.0, ref = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double ca = k < a.solution.length() ? a.solution.coeffs()[k] : 0.0;
    const double cb = k < b.solution.length() ? b.solution.coeffs()[k] : 0.0;
    const double fd = (cb - ca) / (e1 - e0);
    const double tk = k < s.tangent_u.size() ? s.tangent_u[k] / s.tangent_eps : 0.0;
    diff += (fd - tk) * (fd - tk);
    ref += fd * fd;
  }
  EXPECT_LT(std::sqrt(diff / ref), 1e-3);
}

TEST(TracePath, SawtoothDeskScale) {
  const PathResult& r = desk_path();
  ASSERT_TRUE(r.ok()) << to_string(r.status);
  ASSERT_GE(r.points.size(), 2u);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    EXPECT_LT(r.points[i].eps, r.points[i - 1].eps);
    EXPECT_GT(r.points[i].eps, 7.59e-4);
    EXPECT_LT(r.points[i].residual, 1e-3) << i;
    EXPECT_NEAR(std::hypot(norm(r.points[i].tangent_u), r.points[i].tangent_eps), 1.0, 1e-12);
  }
  EXPECT_TRUE(r.final.converged());
  EXPECT_LE(r.final.residual, r.final.eta);
  // u' = tanh((x - x0) / eps) has poles at distance pi eps / 2, so the length
  // scales like 1 / eps; the 5e-5 row of the reference run (230,755) scaled to
  // 7.59e-4 gives about 15,200
  const double expected = 230755.0 * 5e-5 / 7.59e-4;
  EXPECT_GT(static_cast<double>(r.final.length), expected / 2);
  EXPECT_LT(static_cast<double>(r.final.length), expected * 2);
}

TEST(TracePath, IntermediatePointsAreInTheNewtonBasin) {
  const PathResult& r = desk_path();
  ASSERT_TRUE(r.ok());
  NewtonConfig nc;
  nc.eta_r = 1e-12;
  for (std::size_t i = 1; i < r.points.size(); i += 3) {
    const auto& pt = r.points[i];
    const auto s = solve(make_problem("sawtooth", {{"eps", pt.eps}}), nc, pt.solution);
    EXPECT_TRUE(s.converged()) << pt.eps << " " << to_string(s.status);
    EXPECT_LE(s.outer_iterations, 10u) << pt.eps;
  }
}

TEST(TracePath, CsvHasOneRowPerPointPlusFinal) {
  const PathResult& r = desk_path();
  std::ostringstream os;
  r.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "eps,length,time,corrector_iterations");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, r.points.size() + 1);
}

TEST(TracePath, UnknownProblemThrows) {
  EXPECT_THROW(trace_path("no-such-problem", sawtooth_config(1e-3)), UnknownProblem);
}
