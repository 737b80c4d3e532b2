// SPDX-License-Identifier: Apache-2.0
#include "usn/chebfun.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace usn;
using usn::testing::quadrature_coeff;

namespace {
std::vector<double> as_vec(const ChebSeries& u) { return {u.coeffs().begin(), u.coeffs().end()}; }
}  // namespace

TEST(BuildFromFunction, ConstantIsSingleCoefficient) {
  const auto u = build_from_function([](double) { return 1.0; }, {});
  ASSERT_EQ(u.length(), 1u);
  EXPECT_DOUBLE_EQ(u.coeffs()[0], 1.0);
}

TEST(BuildFromFunction, SquareIsHalfT0PlusHalfT2) {
  const auto u = build_from_function([](double x) { return x * x; }, {});
  ASSERT_EQ(u.length(), 3u);
  EXPECT_NEAR(u.coeffs()[0], 0.5, 1e-15);
  EXPECT_NEAR(u.coeffs()[1], 0.0, 1e-15);
  EXPECT_NEAR(u.coeffs()[2], 0.5, 1e-15);
}

TEST(BuildFromFunction, ExponentialMatchesQuadrature) {
  auto f = [](double x) { return std::exp(x); };
  const auto u = build_from_function(f, {});
  EXPECT_NEAR(u.coeffs()[0], 1.26606587775, 1e-11);
  for (int k = 0; k < static_cast<int>(u.length()); ++k) {
    EXPECT_NEAR(u.coeffs()[k], quadrature_coeff(f, k), 1e-14) << "k=" << k;
  }
  EXPECT_LT(u.length(), 20u);
}

TEST(BuildFromFunction, GridLimitRaisesResolutionError) {
  BuildOptions opts;
  opts.max_size = 65;
  EXPECT_THROW(build_from_function([](double x) { return std::abs(x); }, {}, opts),
               ResolutionError);
}

TEST(BuildFromFunction, NonFiniteSampleRaisesDomainError) {
  EXPECT_THROW(build_from_function([](double x) { return std::log(x); }, {}), DomainError);
}

TEST(Evaluate, IdentityAndSquare) {
  EXPECT_DOUBLE_EQ(ChebSeries({0.0, 1.0})(0.3), 0.3);
  EXPECT_NEAR(ChebSeries({0.5, 0.0, 0.5})(0.7), 0.49, 1e-15);
}

TEST(Evaluate, ExponentialAtEndpoint) {
  const auto u = build_from_function([](double x) { return std::exp(x); }, {});
  EXPECT_NEAR(u(1.0), std::exp(1.0), 1e-13);
}

TEST(Evaluate, MappedDomain) {
  const Interval dom{0.0, 10.0};
  const auto u = build_from_function([](double x) { return std::sin(x); }, dom);
  for (double x : {0.0, 1.3, 5.5, 9.99, 10.0}) EXPECT_NEAR(u(x), std::sin(x), 1e-13);
}

TEST(Compose, ZeroThroughExponential) {
  const auto v = compose(ChebSeries({0.0}), [](double t) { return std::exp(t); });
  ASSERT_EQ(v.length(), 1u);
  EXPECT_DOUBLE_EQ(v.coeffs()[0], 1.0);
}

TEST(Compose, IdentitySquared) {
  const auto v = compose(ChebSeries({0.0, 1.0}), [](double t) { return t * t; });
  ASSERT_EQ(v.length(), 3u);
  EXPECT_NEAR(v.coeffs()[0], 0.5, 1e-15);
  EXPECT_NEAR(v.coeffs()[2], 0.5, 1e-15);
}

TEST(Compose, SineMatchesQuadrature) {
  auto f = [](double x) { return std::sin(x); };
  const auto v = compose(ChebSeries({0.0, 1.0}), f);
  EXPECT_NEAR(v.coeffs()[1], 0.880101171, 1e-9);
  for (int k = 0; k < static_cast<int>(v.length()); ++k) {
    EXPECT_NEAR(v.coeffs()[k], quadrature_coeff(f, k), 1e-14);
    if (k % 2 == 0) EXPECT_LT(std::abs(v.coeffs()[k]), 1e-15);
  }
}

TEST(Compose, MultipleInputsWithPosition) {
  const Interval dom{0.0, 2.0};
  const auto u = build_from_function([](double x) { return std::cos(x); }, dom);
  const auto w = build_from_function([](double x) { return x * x; }, dom);
  const auto v = compose({&u, &w}, [](double x, std::span<const double> a) { return x + a[0] * a[1]; });
  for (double x : {0.1, 0.77, 1.9}) EXPECT_NEAR(v(x), x + std::cos(x) * x * x, 1e-13);
}

TEST(Chop, DropsNegligibleTail) {
  EXPECT_EQ(as_vec(chop(ChebSeries({1.0, 1e-20, 1e-20}))), (std::vector<double>{1.0}));
  EXPECT_EQ(as_vec(chop(ChebSeries({0.0, 1.0, 0.0, 0.0}))), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(chop(ChebSeries({0.0, 0.0})).length(), 1u);
}

TEST(Chop, PaddedExponentialReturnsResolvedLength) {
  const auto u = build_from_function([](double x) { return std::exp(x); }, {});
  auto padded = as_vec(u);
  padded.resize(padded.size() + 100, 0.0);
  EXPECT_EQ(chop(ChebSeries(padded)).length(), u.length());
}

TEST(LinearCombination, Examples) {
  const ChebSeries one({1.0}), x({0.0, 1.0}), sq({0.5, 0.0, 0.5}), t2({0.0, 0.0, 1.0});
  EXPECT_EQ(as_vec(linear_combination({{1.0, &one}, {1.0, &x}})), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(as_vec(linear_combination({{2.0, &sq}, {-1.0, &t2}})), (std::vector<double>{1.0}));
}

TEST(LinearCombination, PointwiseOracle) {
  const auto u = build_from_function([](double x) { return std::exp(x); }, {});
  const auto v = build_from_function([](double x) { return std::cos(3 * x); }, {});
  const double alpha = 0.7, beta = -2.5;
  const auto w = linear_combination({{alpha, &u}, {beta, &v}});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pick(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const double x = pick(rng);
    EXPECT_NEAR(w(x), alpha * u(x) + beta * v(x), 1e-14);
  }
}

TEST(Properties, RoundTripReproducesCoefficients) {
  std::mt19937_64 rng(11);
  for (std::size_t len : {5u, 40u, 200u}) {
    auto c = usn::testing::random_vector(rng, len, std::pow(1e-6, 1.0 / len));
    const ChebSeries u(c);
    const auto v = build_from_function([&](double x) { return u(x); }, {});
    double cmax = u.max_abs_coeff();
    ASSERT_GE(v.length(), len - 1);
    for (std::size_t k = 0; k < len; ++k) {
      const double vk = k < v.length() ? v.coeffs()[k] : 0.0;
      EXPECT_NEAR(vk, c[k], 1e-13 * cmax) << "len=" << len << " k=" << k;
    }
  }
}

TEST(Properties, EvenFunctionHasNoOddCoefficients) {
  const auto u = build_from_function([](double x) { return std::cosh(2 * x) / (1 + x * x); }, {});
  const double cmax = u.max_abs_coeff();
  for (std::size_t k = 1; k < u.length(); k += 2) EXPECT_LT(std::abs(u.coeffs()[k]), 1e-14 * cmax);
}

TEST(Properties, DerivativeCarriesDomainScale) {
  const double L = 7.0;
  const Interval dom{0.0, L};
  auto f = [](double x) { return std::sin(x) * std::exp(-0.2 * x); };
  const auto u = build_from_function(f, dom);
  const auto d1 = derivative(u, 1);
  const auto d2 = derivative(u, 2);
  const double h = 1e-4;
  for (double x : {0.5, 2.0, 3.3, 6.1}) {
    const double fd1 = (f(x + h) - f(x - h)) / (2 * h);
    const double h2 = 1e-3;
    const double fd2 = (f(x + h2) - 2 * f(x) + f(x - h2)) / (h2 * h2);
    EXPECT_NEAR(d1(x), fd1, 1e-6 * std::max(1.0, std::abs(fd1)));
    EXPECT_NEAR(d2(x), fd2, 1e-6 * std::max(1.0, std::abs(fd2)));
  }
}

TEST(Csv, RoundTripIsBitExact) {
  const auto u = build_from_function([](double x) { return std::exp(std::sin(3 * x)); }, {});
  std::stringstream ss;
  write_coefficients_csv(ss, u.coeffs());
  const auto back = read_coefficients_csv(ss);
  EXPECT_EQ(back, as_vec(u));
}

TEST(Csv, RejectsMissingHeader) {
  std::stringstream ss("0,1.0\n");
  EXPECT_THROW(read_coefficients_csv(ss), std::runtime_error);
}
