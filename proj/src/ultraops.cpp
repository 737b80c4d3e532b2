// SPDX-License-Identifier: Apache-2.0
#include "usn/ultraops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace usn {

// --- boundary functionals ---------------------------------------------------

double BoundaryRow::entry(std::size_t k) const noexcept {
  // T_k^(m)(1) = prod_{j<m} (k^2 - j^2) / (2j + 1); T_k(-t) = (-1)^k T_k(t)
  double v = 1.0;
  const double kk = static_cast<double>(k) * static_cast<double>(k);
  for (int j = 0; j < order; ++j) v *= (kk - double(j) * double(j)) / (2.0 * j + 1.0);
  if (side < 0 && ((k + static_cast<std::size_t>(order)) % 2 == 1)) v = -v;
  return v * scale;
}

std::vector<double> BoundaryRow::row(std::size_t n) const {
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = entry(k);
  return r;
}

double BoundaryRow::apply(std::span<const double> coeffs) const noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) s += entry(k) * coeffs[k];
  return s;
}

// --- operator shape ---------------------------------------------------------

void OperatorSpec::validate() const {
  if (order < 0) throw std::invalid_argument("operator: negative order");
  if (coeffs.size() != static_cast<std::size_t>(order) + 1) {
    throw std::invalid_argument("operator: expected " + std::to_string(order + 1) +
                                " coefficient series");
  }
  for (const auto& c : coeffs) {
    if (c.empty()) throw std::invalid_argument("operator: empty coefficient series");
  }
  const auto& lead = coeffs[static_cast<std::size_t>(order)];
  if (std::all_of(lead.begin(), lead.end(), [](double v) { return v == 0.0; })) {
    throw std::invalid_argument("operator: leading coefficient vanishes identically");
  }
}

std::int64_t diff_scale(int lambda) {
  if (lambda < 0 || lambda > 20) throw std::invalid_argument("diff_scale: order out of range");
  std::int64_t s = 1;
  for (int k = 1; k < lambda; ++k) s *= 2 * k;  // 2^(lambda-1) (lambda-1)!
  return s;
}

double conv_diag(int lambda, std::size_t j) noexcept {
  if (lambda == 0) return j == 0 ? 1.0 : 0.5;
  return double(lambda) / (double(lambda) + double(j));
}

double conv_super(int lambda, std::size_t j) noexcept {
  if (lambda == 0) return -0.5;
  return -double(lambda) / (double(lambda) + double(j) + 2.0);
}

double conv_inv_weight(int lambda, std::size_t i) noexcept {
  if (lambda == 0) return i == 0 ? 1.0 : 2.0;
  return (double(lambda) + double(i)) / double(lambda);
}

// --- raw kernels ------------------------------------------------------------

template <typename Real>
void apply_diff(int lambda, std::span<const Real> in, std::span<Real> out) {
  const Real sc = static_cast<Real>(diff_scale(lambda));
  const std::size_t l = static_cast<std::size_t>(lambda);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::size_t src = j + l;
    if (src >= in.size()) {
      out[j] = Real(0);
    } else {
      out[j] = lambda == 0 ? in[src] : sc * static_cast<Real>(src) * in[src];
    }
  }
}

template <typename Real>
void apply_diff_transpose(int lambda, std::span<const Real> in, std::span<Real> out) {
  const Real sc = static_cast<Real>(diff_scale(lambda));
  const std::size_t l = static_cast<std::size_t>(lambda);
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (j < l || j - l >= in.size()) {
      out[j] = Real(0);
    } else {
      out[j] = lambda == 0 ? in[j] : sc * static_cast<Real>(j) * in[j - l];
    }
  }
}

template <typename Real>
void apply_conv(int lambda, std::span<const Real> in, std::span<Real> out) {
  const std::size_t len = in.size();
  for (std::size_t j = 0; j < out.size(); ++j) {
    Real v = j < len ? static_cast<Real>(conv_diag(lambda, j)) * in[j] : Real(0);
    if (j + 2 < len) v += static_cast<Real>(conv_super(lambda, j)) * in[j + 2];
    out[j] = v;
  }
}

template <typename Real>
void apply_conv_transpose(int lambda, std::span<const Real> in, std::span<Real> out) {
  const std::size_t len = in.size();
  for (std::size_t j = 0; j < out.size(); ++j) {
    Real v = j < len ? static_cast<Real>(conv_diag(lambda, j)) * in[j] : Real(0);
    if (j >= 2 && j - 2 < len) v += static_cast<Real>(conv_super(lambda, j - 2)) * in[j - 2];
    out[j] = v;
  }
}

template <typename Real>
void apply_conv_inv(int lambda, std::span<const Real> in, std::span<Real> out) {
  // out_i = c_i * sum_{j >= i, j = i mod 2} in_j
  Real sums[2] = {Real(0), Real(0)};
  const std::size_t top = std::max(in.size(), out.size());
  for (std::size_t i = top; i-- > 0;) {
    if (i < in.size()) sums[i & 1] += in[i];
    if (i < out.size()) out[i] = static_cast<Real>(conv_inv_weight(lambda, i)) * sums[i & 1];
  }
}

template <typename Real>
void apply_conv_inv_transpose(int lambda, std::span<const Real> in, std::span<Real> out) {
  // out_i = sum_{j <= i, j = i mod 2} c_j in_j
  Real sums[2] = {Real(0), Real(0)};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i < in.size()) sums[i & 1] += static_cast<Real>(conv_inv_weight(lambda, i)) * in[i];
    out[i] = sums[i & 1];
  }
}

#define USN_INSTANTIATE(Real)                                                            \
  template void apply_diff<Real>(int, std::span<const Real>, std::span<Real>);           \
  template void apply_diff_transpose<Real>(int, std::span<const Real>, std::span<Real>); \
  template void apply_conv<Real>(int, std::span<const Real>, std::span<Real>);           \
  template void apply_conv_transpose<Real>(int, std::span<const Real>, std::span<Real>); \
  template void apply_conv_inv<Real>(int, std::span<const Real>, std::span<Real>);       \
  template void apply_conv_inv_transpose<Real>(int, std::span<const Real>, std::span<Real>);
USN_INSTANTIATE(float)
USN_INSTANTIATE(double)
#undef USN_INSTANTIATE

// --- tagged applies ---------------------------------------------------------

namespace {
void require_basis(const BasisVector& v, Level expected, const char* what) {
  if (v.basis != expected) {
    throw std::invalid_argument(std::string(what) + ": input in basis " + std::to_string(v.basis) +
                                ", expected " + std::to_string(expected));
  }
}
}  // namespace

BasisVector diff_op_apply(int lambda, const BasisVector& v, std::size_t n) {
  require_basis(v, 0, "diff_op_apply");
  BasisVector out{std::vector<double>(n), lambda};
  apply_diff<double>(lambda, v.coeffs, out.coeffs);
  return out;
}

BasisVector conv_op_apply(Level lambda, const BasisVector& v, std::size_t n) {
  require_basis(v, lambda, "conv_op_apply");
  BasisVector out{std::vector<double>(n), lambda + 1};
  apply_conv<double>(lambda, v.coeffs, out.coeffs);
  return out;
}

BasisVector conv_inv_apply(Level lambda, const BasisVector& v, std::size_t n) {
  require_basis(v, lambda + 1, "conv_inv_apply");
  BasisVector out{std::vector<double>(n), lambda};
  apply_conv_inv<double>(lambda, v.coeffs, out.coeffs);
  return out;
}

// --- multiplication generators ---------------------------------------------

M0Parts m0_parts(const MultCoeffs& a) {
  if (a.basis != 0) throw std::invalid_argument("m0_parts: coefficients must be Chebyshev");
  M0Parts p;
  p.toeplitz = a.coeffs;
  if (!p.toeplitz.empty()) p.toeplitz[0] *= 2.0;
  p.hankel = a.coeffs;
  p.rank1 = a.coeffs;
  return p;
}

M1Symbols m1_symbols(const MultCoeffs& ahat) {
  if (ahat.basis != 0) throw std::invalid_argument("m1_symbols: coefficients must be Chebyshev");
  M1Symbols s;
  s.toeplitz = ahat.coeffs;
  if (!s.toeplitz.empty()) s.toeplitz[0] *= 2.0;
  if (ahat.coeffs.size() > 2) s.hankel.assign(ahat.coeffs.begin() + 2, ahat.coeffs.end());
  return s;
}

MultCoeffs mlambda_chebyshev_coeffs(const MultCoeffs& a) {
  std::vector<double> cur = a.coeffs, next(a.coeffs.size());
  for (Level l = a.basis; l-- > 0;) {
    apply_conv_inv<double>(l, cur, next);
    std::swap(cur, next);
  }
  return {std::move(cur), 0};
}

MultCoeffs chebyshev_to_ultraspherical(const MultCoeffs& a, Level lambda) {
  if (a.basis != 0) throw std::invalid_argument("chebyshev_to_ultraspherical: input not Chebyshev");
  std::vector<double> cur = a.coeffs, next(a.coeffs.size());
  for (Level l = 0; l < lambda; ++l) {
    apply_conv<double>(l, cur, next);
    std::swap(cur, next);
  }
  return {std::move(cur), lambda};
}

// --- dense truncations ------------------------------------------------------

namespace {
using Index = Eigen::Index;
Index idx(std::size_t v) { return static_cast<Index>(v); }
double coeff_at(const std::vector<double>& a, std::size_t k) { return k < a.size() ? a[k] : 0.0; }
}  // namespace

DenseMatrix dense_diff(int lambda, std::size_t rows, std::size_t cols) {
  DenseMatrix d = DenseMatrix::Zero(idx(rows), idx(cols));
  const double sc = static_cast<double>(diff_scale(lambda));
  for (std::size_t j = 0; j < rows; ++j) {
    const std::size_t c = j + static_cast<std::size_t>(lambda);
    if (c < cols) d(idx(j), idx(c)) = lambda == 0 ? 1.0 : sc * static_cast<double>(c);
  }
  return d;
}

DenseMatrix dense_conv(Level lambda, std::size_t rows, std::size_t cols) {
  DenseMatrix s = DenseMatrix::Zero(idx(rows), idx(cols));
  for (std::size_t j = 0; j < rows; ++j) {
    if (j < cols) s(idx(j), idx(j)) = conv_diag(lambda, j);
    if (j + 2 < cols) s(idx(j), idx(j + 2)) = conv_super(lambda, j);
  }
  return s;
}

DenseMatrix dense_conv_inv(Level lambda, std::size_t size) {
  DenseMatrix s = DenseMatrix::Zero(idx(size), idx(size));
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = i; j < size; j += 2) s(idx(i), idx(j)) = conv_inv_weight(lambda, i);
  }
  return s;
}

DenseMatrix dense_m0(const MultCoeffs& a, std::size_t rows, std::size_t cols) {
  if (a.basis != 0) throw std::invalid_argument("dense_m0: coefficients must be Chebyshev");
  const auto& c = a.coeffs;
  DenseMatrix m(idx(rows), idx(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t d = i > j ? i - j : j - i;
      double v = d == 0 ? 2.0 * coeff_at(c, 0) : coeff_at(c, d);
      v += coeff_at(c, i + j);
      if (i == 0) v -= coeff_at(c, j);
      m(idx(i), idx(j)) = 0.5 * v;
    }
  }
  return m;
}

DenseMatrix dense_m1(const MultCoeffs& ahat, std::size_t rows, std::size_t cols) {
  if (ahat.basis != 0) throw std::invalid_argument("dense_m1: coefficients must be Chebyshev");
  const auto& c = ahat.coeffs;
  DenseMatrix m(idx(rows), idx(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t d = i > j ? i - j : j - i;
      const double t = d == 0 ? 2.0 * coeff_at(c, 0) : coeff_at(c, d);
      m(idx(i), idx(j)) = 0.5 * t - 0.5 * coeff_at(c, i + j + 2);
    }
  }
  return m;
}

DenseMatrix dense_mlambda(const std::vector<double>& ahat, Level lambda, std::size_t rows,
                          std::size_t cols) {
  // M_l S_{l-1} = S_{l-1} M_{l-1}, solved column by column inside the band
  // |i - j| <= deg(a) that M_l is known to occupy.
  const std::size_t l = static_cast<std::size_t>(lambda);
  const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(ahat.empty() ? 0 : ahat.size() - 1);
  DenseMatrix m = dense_m0({ahat, 0}, rows + 2 * l, cols);
  for (Level k = 1; k <= lambda; ++k) {
    const std::size_t r = static_cast<std::size_t>(m.rows()) - 2;
    DenseMatrix x = DenseMatrix::Zero(idx(r), idx(cols));
    for (std::size_t j = 0; j < cols; ++j) {
      const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j);
      const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, jj - d));
      const std::size_t hi = std::min(r, j + static_cast<std::size_t>(d) + 1);
      const double sjj = conv_diag(k - 1, j);
      const double sup = j >= 2 ? conv_super(k - 1, j - 2) : 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const double b = conv_diag(k - 1, i) * m(idx(i), idx(j)) +
                         conv_super(k - 1, i) * m(idx(i + 2), idx(j));
        const double prev = j >= 2 ? x(idx(i), idx(j - 2)) : 0.0;
        x(idx(i), idx(j)) = (b - sup * prev) / sjj;
      }
    }
    m = std::move(x);
  }
  return m;
}

DenseMatrix dense_term(const OperatorSpec& op, int lambda, std::size_t n) {
  const std::size_t N = static_cast<std::size_t>(op.order);
  if (n <= N) throw std::invalid_argument("dense_term: n must exceed the operator order");
  const std::size_t rows = (n - N) + 2 * (N - static_cast<std::size_t>(lambda));
  DenseMatrix t = dense_mlambda(op.coeffs[static_cast<std::size_t>(lambda)], lambda, rows, n) *
                  dense_diff(lambda, n, n);
  for (int k = lambda; k < op.order; ++k) {
    const std::size_t r = static_cast<std::size_t>(t.rows());
    t = dense_conv(k, r - 2, r) * t;
  }
  return t;
}

DenseMatrix dense_truncation(const OperatorSpec& op, std::span<const BoundaryRow> bcs,
                             std::size_t n) {
  op.validate();
  const std::size_t N = static_cast<std::size_t>(op.order);
  if (bcs.size() != N) throw std::invalid_argument("dense_truncation: need one boundary row per order");
  DenseMatrix a = DenseMatrix::Zero(idx(n), idx(n));
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t k = 0; k < n; ++k) a(idx(t), idx(k)) = bcs[t].entry(k);
  }
  for (int lambda = 0; lambda <= op.order; ++lambda) {
    a.bottomRows(idx(n - N)) += dense_term(op, lambda, n);
  }
  return a;
}

}  // namespace usn
