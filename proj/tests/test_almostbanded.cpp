// SPDX-License-Identifier: Apache-2.0
#include "usn/almostbanded.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <random>

using namespace usn;
using usn::testing::random_vector;

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const std::vector<BoundaryRow> kDirichlet{{-1, 0, 1.0}, {1, 0, 1.0}};

AlmostBandedMatrix random_almost_banded(std::mt19937_64& rng, std::size_t n, std::size_t nd,
                                        std::size_t lo, std::size_t up) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  AlmostBandedMatrix w(n, nd, lo, up);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (w.in_structure(i, j)) w.at(i, j) = dist(rng);
    }
    if (i >= nd) w.at(i, i) += 4.0;
  }
  return w;
}

OperatorSpec bratu_at_zero(double beta) { return {2, {{beta}, {0.0}, {1.0}}}; }

}  // namespace

TEST(BandwidthRule, Examples) {
  EXPECT_EQ(bandwidth_rule(1024), 3);
  EXPECT_EQ(bandwidth_rule(2), 1);
  EXPECT_EQ(bandwidth_rule(65536), 4);
  EXPECT_EQ(bandwidth_rule(512), 3);
  EXPECT_EQ(bandwidth_rule(511), 2);
  EXPECT_THROW(bandwidth_rule(1), std::invalid_argument);
}

TEST(AlmostBandedMatrix, StructureAndAccess) {
  AlmostBandedMatrix w(10, 2, 1, 3);
  EXPECT_TRUE(w.in_structure(0, 9));
  EXPECT_TRUE(w.in_structure(5, 4));
  EXPECT_FALSE(w.in_structure(5, 3));
  EXPECT_TRUE(w.in_structure(5, 8));
  EXPECT_FALSE(w.in_structure(5, 9));
  EXPECT_THROW(w.at(5, 9), std::out_of_range);
  w.at(5, 8) = 2.5;
  EXPECT_EQ(w(5, 8), 2.5);
  EXPECT_EQ(w(5, 9), 0.0);
}

TEST(BuildPreconditioner, ConstantCoefficientsGiveTheFullBody) {
  const OperatorSpec op{2, {{-3.0}, {0.5}, {2.0}}};
  const std::size_t n = 40;
  const auto w = build_preconditioner(op, kDirichlet, n, 2);
  const DenseMatrix ref = dense_truncation(op, kDirichlet, n);
  EXPECT_LT((w.to_dense() - ref).cwiseAbs().maxCoeff(), 1e-13 * ref.cwiseAbs().maxCoeff());
}

TEST(BuildPreconditioner, BratuMatchesDenseWithinBand) {
  const OperatorSpec op = bratu_at_zero(3.2);
  for (std::size_t n : {16u, 64u}) {
    const int p = bandwidth_rule(n);
    const auto w = build_preconditioner(op, kDirichlet, n, p);
    const DenseMatrix ref = dense_truncation(op, kDirichlet, n);
    const double scale = ref.cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double r = ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (w.in_structure(i, j)) EXPECT_NEAR(w(i, j), r, 1e-14 * scale) << i << "," << j;
      }
    }
  }
}

TEST(BuildPreconditioner, LowDegreeCoefficientsAreReproducedExactly) {
  // degree d^lambda <= p + lambda: the truncation changes nothing
  const OperatorSpec op{2, {{0.3, 0.2, -0.1}, {0.0, 0.4}, {1.5, 0.0, 0.2}}};
  const std::size_t n = 48;
  const auto w = build_preconditioner(op, kDirichlet, n, 2);
  const DenseMatrix ref = dense_truncation(op, kDirichlet, n);
  EXPECT_LT((w.to_dense() - ref).cwiseAbs().maxCoeff(), 1e-13 * ref.cwiseAbs().maxCoeff());
}

TEST(BuildPreconditioner, StructuralZerosAboveTheBand) {
  std::mt19937_64 rng(7);
  for (int N = 1; N <= 4; ++N) {
    OperatorSpec op{N, {}};
    for (int l = 0; l <= N; ++l) op.coeffs.push_back(random_vector(rng, 20, 0.7));
    op.coeffs.back()[0] += 5.0;
    std::vector<BoundaryRow> bcs;
    for (int t = 0; t < N; ++t) bcs.push_back({t % 2 == 0 ? -1 : 1, t / 2, 1.0});
    const std::size_t n = 80;
    const int p = bandwidth_rule(n);
    const DenseMatrix d = build_preconditioner(op, bcs, n, p).to_dense();
    for (std::size_t i = static_cast<std::size_t>(N); i < n; ++i) {
      const std::size_t r = i - static_cast<std::size_t>(N);
      for (std::size_t j = 0; j < n; ++j) {
        const auto off = static_cast<long>(j) - static_cast<long>(r);
        if (off > p + 2 * N || off < -p) {
          EXPECT_EQ(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 0.0);
        }
      }
    }
  }
}

TEST(BuildPreconditioner, RejectsBadArguments) {
  const OperatorSpec op = bratu_at_zero(1.0);
  EXPECT_THROW(build_preconditioner(op, kDirichlet, 2, 1), std::invalid_argument);
  const std::vector<BoundaryRow> one{{-1, 0, 1.0}};
  EXPECT_THROW(build_preconditioner(op, one, 20, 1), std::invalid_argument);
}

TEST(AlmostBandedQR, IdentityLikeReturnsRhs) {
  const std::size_t n = 25;
  AlmostBandedMatrix w(n, 1, 1, 1);
  w.dense_row(0)[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) w.at(i, i) = 1.0;
  const AlmostBandedQR qr(w);
  std::mt19937_64 rng(1);
  const auto b = random_vector(rng, n);
  const auto x = qr.solve(b);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], b[i], 1e-15);
}

TEST(AlmostBandedQR, RandomAgainstDenseLu) {
  std::mt19937_64 rng(11);
  const std::size_t n = 200;
  for (auto [nd, lo, up] : {std::tuple<std::size_t, std::size_t, std::size_t>{2, 4, 4},
                            {4, 6, 6},
                            {1, 2, 5},
                            {0, 3, 3}}) {
    const auto w = random_almost_banded(rng, n, nd, lo, up);
    const auto b = random_vector(rng, n);
    const Eigen::VectorXd ref = w.to_dense().partialPivLu().solve(to_eigen(b));
    const auto x = AlmostBandedQR(w).solve(b);
    EXPECT_LT((to_eigen(x) - ref).norm() / ref.norm(), 1e-10) << nd << " " << lo << " " << up;
  }
}

TEST(AlmostBandedQR, DuplicatedBoundaryRowIsSingular) {
  auto w = build_preconditioner(bratu_at_zero(1.0), std::vector<BoundaryRow>{{-1, 0, 1.0}, {-1, 0, 1.0}},
                                32, 2);
  EXPECT_THROW({ AlmostBandedQR qr(w); }, SingularPreconditioner);
}

TEST(AlmostBandedQR, RoundTripOnBratuPreconditioner) {
  const std::size_t n = 128;
  const auto w = build_preconditioner(bratu_at_zero(3.0), kDirichlet, n, bandwidth_rule(n));
  const AlmostBandedQR qr(w);
  std::mt19937_64 rng(5);
  const auto b = random_vector(rng, n);
  const auto x = qr.solve(b);
  std::vector<double> wx(n);
  w.apply(x, wx);
  EXPECT_LT((to_eigen(wx) - to_eigen(b)).norm() / to_eigen(b).norm(), 1e-11);
}

TEST(AlmostBandedQR, FlopCountGrowsLinearly) {
  const OperatorSpec op = bratu_at_zero(2.0);
  std::vector<double> per_row;
  for (std::size_t n : {1000u, 2000u, 4000u, 8000u}) {
    const AlmostBandedQR qr(build_preconditioner(op, kDirichlet, n, 3));
    per_row.push_back(static_cast<double>(qr.flops()) / static_cast<double>(n));
  }
  for (std::size_t k = 1; k < per_row.size(); ++k) {
    EXPECT_NEAR(per_row[k] / per_row[0], 1.0, 0.05);
  }
}

TEST(AlmostBandedQR, FloatSolveTracksDouble) {
  std::mt19937_64 rng(19);
  const std::size_t n = 150;
  const auto w = random_almost_banded(rng, n, 2, 3, 5);
  const AlmostBandedQR qr(w);
  const auto b = random_vector(rng, n);
  const auto xd = qr.solve(b);
  std::vector<float> xf(b.begin(), b.end());
  qr.solve_in_place<float>(xf);
  double err = 0.0, nrm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    err += std::pow(xf[i] - xd[i], 2);
    nrm += xd[i] * xd[i];
  }
  EXPECT_LT(std::sqrt(err / nrm), 1e-4);
}

TEST(RightPreconditioner, DiagonalFallbackOnSingularW) {
  AlmostBandedMatrix w(6, 2, 1, 1);
  for (std::size_t j = 0; j < 6; ++j) w.dense_row(0)[j] = w.dense_row(1)[j] = 1.0;
  for (std::size_t i = 2; i < 6; ++i) w.at(i, i) = static_cast<double>(i);
  const auto p = RightPreconditioner::from_matrix(w);
  EXPECT_TRUE(p.is_diagonal());
  std::vector<double> b{1, 2, 3, 4, 5, 6};
  p.solve_in_place<double>(b);
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  EXPECT_DOUBLE_EQ(b[1], 2.0);
  EXPECT_DOUBLE_EQ(b[2], 1.5);
}

TEST(RightPreconditioner, IdentityAndBuild) {
  const auto id = RightPreconditioner::identity(4);
  EXPECT_TRUE(id.is_identity());
  std::vector<double> b{1, 2, 3, 4};
  id.solve_in_place<double>(b);
  EXPECT_EQ(b[2], 3.0);
  const auto p = RightPreconditioner::build(bratu_at_zero(1.0), kDirichlet, 64, 2);
  EXPECT_NE(p.qr(), nullptr);
}
