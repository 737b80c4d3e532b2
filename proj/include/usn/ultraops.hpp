// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/boundary.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace usn {

/// Basis level: 0 is Chebyshev T, lambda >= 1 is ultraspherical C^(lambda).
using Level = int;

/// Coefficient vector tagged with the basis it is expressed in.
struct BasisVector {
  std::vector<double> coeffs;
  Level basis = 0;
};

/// Coefficients of a variable coefficient in a given basis.
struct MultCoeffs {
  std::vector<double> coeffs;
  Level basis = 0;
  std::size_t degree() const noexcept { return coeffs.empty() ? 0 : coeffs.size() - 1; }
};

/// Linear differential operator sum_lambda a^lambda(t) d^lambda/dt^lambda on
/// [-1, 1]. Each a^lambda is held by its Chebyshev T coefficients; domain
/// scaling is already folded into them.
struct OperatorSpec {
  int order = 0;
  std::vector<std::vector<double>> coeffs;  // coeffs[lambda], lambda = 0..order

  bool is_constant(int lambda) const noexcept { return coeffs[lambda].size() <= 1; }
  std::size_t degree(int lambda) const noexcept {
    return coeffs[lambda].empty() ? 0 : coeffs[lambda].size() - 1;
  }
  /// Throws if the shape is inconsistent or the leading coefficient vanishes.
  void validate() const;
};

/// 2^(lambda-1) (lambda-1)!, exact for lambda <= 8.
std::int64_t diff_scale(int lambda);

// --- raw kernels on zero-padded coefficient arrays -------------------------
//
// `in` is treated as zero beyond its end; `out` receives as many entries as
// it holds. These are the building blocks of both the fast applicator and the
// preconditioner; Real is float or double.

template <typename Real>
void apply_diff(int lambda, std::span<const Real> in, std::span<Real> out);
template <typename Real>
void apply_diff_transpose(int lambda, std::span<const Real> in, std::span<Real> out);

/// S_lambda: C^(lambda) -> C^(lambda+1) (lambda = 0 means T -> C^(1)).
template <typename Real>
void apply_conv(int lambda, std::span<const Real> in, std::span<Real> out);
template <typename Real>
void apply_conv_transpose(int lambda, std::span<const Real> in, std::span<Real> out);

/// S_lambda^{-1} = triu(c^lambda r), applied by parity suffix sums.
template <typename Real>
void apply_conv_inv(int lambda, std::span<const Real> in, std::span<Real> out);
template <typename Real>
void apply_conv_inv_transpose(int lambda, std::span<const Real> in, std::span<Real> out);

/// Diagonal and second superdiagonal of S_lambda.
double conv_diag(int lambda, std::size_t j) noexcept;
double conv_super(int lambda, std::size_t j) noexcept;  // entry (j, j+2)
/// c^lambda_i, the row weight of S_lambda^{-1}.
double conv_inv_weight(int lambda, std::size_t i) noexcept;

// --- tagged operator applies ----------------------------------------------

BasisVector diff_op_apply(int lambda, const BasisVector& v, std::size_t n);
BasisVector conv_op_apply(Level lambda, const BasisVector& v, std::size_t n);
BasisVector conv_inv_apply(Level lambda, const BasisVector& v, std::size_t n);

/// Generators of 2 M_0[a] = T[a] + H[a] + R[a] for Chebyshev coefficients a.
struct M0Parts {
  std::vector<double> toeplitz;  // t_0 = 2 a_0, t_k = a_k
  std::vector<double> hankel;    // h_k = a_k, H_ij = h_{i+j}
  std::vector<double> rank1;     // R = -e_1 rank1^T
};
M0Parts m0_parts(const MultCoeffs& a);

/// Generators of M_1[a] = (1/2) Toeplitz(toeplitz) - (1/2) Hankel(hankel),
/// where hankel_k = a_{k+2}.
struct M1Symbols {
  std::vector<double> toeplitz;
  std::vector<double> hankel;
};
M1Symbols m1_symbols(const MultCoeffs& ahat);

/// Chebyshev coefficients of a function given by its C^(lambda) coefficients.
MultCoeffs mlambda_chebyshev_coeffs(const MultCoeffs& a);
/// C^(lambda) coefficients of a function given by Chebyshev coefficients.
MultCoeffs chebyshev_to_ultraspherical(const MultCoeffs& a, Level lambda);

// --- dense truncations (oracles, spectra, small solves) ---------------------

using DenseMatrix = Eigen::MatrixXd;

DenseMatrix dense_diff(int lambda, std::size_t rows, std::size_t cols);
DenseMatrix dense_conv(Level lambda, std::size_t rows, std::size_t cols);
DenseMatrix dense_conv_inv(Level lambda, std::size_t size);
DenseMatrix dense_m0(const MultCoeffs& a, std::size_t rows, std::size_t cols);
DenseMatrix dense_m1(const MultCoeffs& ahat, std::size_t rows, std::size_t cols);
/// M_lambda for a function given by Chebyshev coefficients. Equal to
/// S_{lambda-1}...S_0 M_0[ahat] S_0^{-1}...S_{lambda-1}^{-1}, but obtained from
/// M_l S_{l-1} = S_{l-1} M_{l-1} restricted to the band, so entries outside
/// |i - j| <= deg(ahat) are exactly zero.
DenseMatrix dense_mlambda(const std::vector<double>& ahat, Level lambda, std::size_t rows,
                          std::size_t cols);

/// The lambda-th term S_{N-1}...S_lambda M_lambda[a^lambda] D_lambda of the
/// operator, truncated to (n - N) x n.
DenseMatrix dense_term(const OperatorSpec& op, int lambda, std::size_t n);

/// Boundary rows stacked over P_{n-N} L P_n^T: the n x n square system.
DenseMatrix dense_truncation(const OperatorSpec& op, std::span<const BoundaryRow> bcs,
                             std::size_t n);

}  // namespace usn
