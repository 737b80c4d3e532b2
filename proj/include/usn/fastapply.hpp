// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/boundary.hpp"
#include "usn/fft.hpp"
#include "usn/ultraops.hpp"

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace usn {

/// y = T v with T_ij = col[i - j] for i >= j and row[j - i] for j > i
/// (row[0] is ignored). T is m x v.size(); entries beyond the generators are
/// zero. Circulant embedding, exact up to rounding.
std::vector<double> toeplitz_apply(std::span<const double> col, std::span<const double> row,
                                   std::span<const double> v, std::size_t m);
/// Symmetric Toeplitz: T_ij = symbol[|i - j|].
std::vector<double> toeplitz_apply(std::span<const double> symbol, std::span<const double> v,
                                   std::size_t m);
/// y = H v with H_ij = symbol[i + j], H of size m x v.size().
std::vector<double> hankel_apply(std::span<const double> symbol, std::span<const double> v,
                                 std::size_t m);

/// Fast apply of the n x n system [B; P_{n-N} L P_n^T], where B holds the
/// boundary rows and L = sum_lambda S_{N-1}...S_lambda M_lambda[a^lambda] D_lambda.
///
/// Variable-coefficient terms use pre-transformed Toeplitz and Hankel symbols
/// (M_0 route for lambda = 0, M_1 route with the S^{-1} chain for lambda >= 1);
/// constant-coefficient terms reduce to scalar multiples and skip the FFT.
/// Products are formed to n + N rows before the final conversions so that the
/// truncation is exact. Immutable once built; apply is reentrant.
template <typename Real>
class JacobianApplicator {
 public:
  using Complex = std::complex<Real>;

  JacobianApplicator(const OperatorSpec& op, std::span<const BoundaryRow> bcs, std::size_t n,
                     FftPlanCache& cache = FftPlanCache::global());

  std::size_t size() const noexcept { return n_; }
  int order() const noexcept { return order_; }
  std::size_t fft_length() const noexcept { return fft_len_; }
  /// Forward plus inverse transforms executed by one apply.
  std::size_t ffts_per_apply() const noexcept;

  void apply(std::span<const Real> v, std::span<Real> out) const;
  std::vector<Real> apply(std::span<const Real> v) const;
  void transpose_apply(std::span<const Real> w, std::span<Real> out) const;
  std::vector<Real> transpose_apply(std::span<const Real> w) const;

 private:
  struct Term {
    bool constant = true;
    Real scalar = 0;                    // value when constant
    std::vector<Complex> fwd_toeplitz;  // symbols for the (n + N) x n product
    std::vector<Complex> fwd_hankel;    // pre-multiplied by the flip phase
    std::vector<Complex> tr_toeplitz;   // symbols for the n x (n + N) transpose
    std::vector<Complex> tr_hankel;
  };

  void check_size(std::size_t got, const char* what) const;

  std::size_t n_;
  int order_;
  std::size_t ext_;      // n + N, rows formed before conversion
  std::size_t fft_len_;  // circulant length >= ext_ + n - 1
  std::vector<Term> terms_;
  std::vector<Real> rank1_;  // a^0 for the rank-one part of M_0
  std::vector<std::vector<Real>> bc_rows_;
  std::shared_ptr<const RealFftPlan<Real>> plan_;
};

extern template class JacobianApplicator<float>;
extern template class JacobianApplicator<double>;

}  // namespace usn
