// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/boundary.hpp"
#include "usn/ultraops.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace usn {

/// p = floor(sqrt(log2 n)) for n >= 2.
int bandwidth_rule(std::size_t n);

class SingularPreconditioner : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n x n matrix whose first `dense_rows` rows are full and whose remaining
/// rows are banded: row i holds columns [i - lower, i + upper].
class AlmostBandedMatrix {
 public:
  AlmostBandedMatrix(std::size_t n, std::size_t dense_rows, std::size_t lower, std::size_t upper);

  std::size_t size() const noexcept { return n_; }
  std::size_t dense_rows() const noexcept { return nd_; }
  std::size_t lower() const noexcept { return lo_; }
  std::size_t upper() const noexcept { return up_; }

  /// Entry (i, j); zero outside the structure.
  double operator()(std::size_t i, std::size_t j) const noexcept;
  /// Writable entry; throws std::out_of_range outside the structure.
  double& at(std::size_t i, std::size_t j);
  bool in_structure(std::size_t i, std::size_t j) const noexcept;

  std::span<const double> dense_row(std::size_t t) const noexcept {
    return {dense_.data() + t * n_, n_};
  }
  std::span<double> dense_row(std::size_t t) noexcept { return {dense_.data() + t * n_, n_}; }

  void apply(std::span<const double> x, std::span<double> y) const;
  double norm_inf() const noexcept;
  DenseMatrix to_dense() const;

 private:
  std::size_t n_, nd_, lo_, up_, width_;
  std::vector<double> dense_;  // nd_ x n_
  std::vector<double> band_;   // (n_ - nd_) x width_, row i at offset (i - nd_) * width_
};

/// W = [boundary rows; banded approximation of the operator body].
///
/// Each coefficient a^lambda is expanded in C^(lambda), truncated to its first
/// p + lambda + 1 terms, and the resulting term S_{N-1}...S_lambda M_lambda D_lambda
/// is formed exactly. The body then has lower bandwidth p and upper
/// bandwidth p + 2N (relative to the body rows).
AlmostBandedMatrix build_preconditioner(const OperatorSpec& op, std::span<const BoundaryRow> bcs,
                                        std::size_t n, int p);

/// Givens QR of an almost-banded matrix in O((l + u + N) l n) work.
///
/// Rows outside their explicit window [i - l, i + l + u] are tracked as
/// combinations alpha_i of the original dense rows, so fill from the dense
/// block costs O(N) per row instead of O(n).
class AlmostBandedQR {
 public:
  explicit AlmostBandedQR(const AlmostBandedMatrix& w);

  std::size_t size() const noexcept { return n_; }
  /// Floating-point operations spent in the factorization.
  std::uint64_t flops() const noexcept { return flops_; }
  /// Smallest |R_kk| relative to ||W||_inf.
  double min_pivot_ratio() const noexcept { return min_pivot_; }

  /// Overwrites b with W^{-1} b. Real is float or double.
  template <typename Real>
  void solve_in_place(std::span<Real> b) const;
  std::vector<double> solve(std::span<const double> b) const;

 private:
  template <typename Real>
  struct Factors {
    std::vector<Real> rows;   // n x width: R row k over columns [k - l, k + l + u]
    std::vector<Real> alpha;  // n x nd
    std::vector<Real> dense;  // nd x n, original dense rows
    std::vector<Real> cs;     // rotations, n x l pairs (c, s)
  };
  template <typename Real>
  const Factors<Real>& factors() const;

  std::size_t n_, nd_, lo_, up_, width_;
  Factors<double> fd_;
  Factors<float> ff_;
  std::uint64_t flops_ = 0;
  double min_pivot_ = 0.0;
};

/// Right preconditioner for GMRES: the almost-banded QR when it is
/// nonsingular, otherwise diag(W) with zero diagonals replaced by one.
class RightPreconditioner {
 public:
  static RightPreconditioner identity(std::size_t n);
  static RightPreconditioner from_matrix(const AlmostBandedMatrix& w);
  static RightPreconditioner build(const OperatorSpec& op, std::span<const BoundaryRow> bcs,
                                   std::size_t n, int p);

  std::size_t size() const noexcept { return n_; }
  bool is_diagonal() const noexcept { return !qr_ && !diag_.empty(); }
  bool is_identity() const noexcept { return !qr_ && diag_.empty(); }
  const AlmostBandedQR* qr() const noexcept { return qr_.get(); }

  template <typename Real>
  void solve_in_place(std::span<Real> b) const;

 private:
  std::size_t n_ = 0;
  std::shared_ptr<const AlmostBandedQR> qr_;
  std::vector<double> diag_;
};

}  // namespace usn
