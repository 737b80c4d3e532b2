// SPDX-License-Identifier: Apache-2.0
#include "usn/fastapply.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace usn {

namespace {

using CVec = std::vector<std::complex<double>>;

// Spectrum of the length-L circulant whose leading rows x cols block is the
// Toeplitz matrix with entries g(i - j), divided by L so that one unnormalized
// inverse transform yields the product. A nonzero `flip` multiplies by
// exp(-2 pi i (flip - 1) k / L), which turns conj(FFT(v)) into FFT of the
// reversed v (length flip).
CVec circulant_spectrum(std::size_t L, std::size_t rows, std::size_t cols,
                        const std::function<double(std::ptrdiff_t)>& g, std::size_t flip = 0) {
  std::vector<double> c(L, 0.0);
  for (std::size_t k = 0; k < rows; ++k) c[k] = g(static_cast<std::ptrdiff_t>(k));
  for (std::size_t k = 1; k < cols; ++k) c[L - k] = g(-static_cast<std::ptrdiff_t>(k));
  auto plan = FftPlanCache::global().plan_double(L);
  CVec spec(plan->spectrum_size());
  plan->forward(c, spec);
  const double inv = 1.0 / static_cast<double>(L);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k] *= inv;
    if (flip > 0) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((flip - 1) * k % L) /
                         static_cast<double>(L);
      spec[k] *= std::complex<double>(std::cos(ang), std::sin(ang));
    }
  }
  return spec;
}

std::vector<double> circulant_product(std::size_t L, const CVec& sym, std::span<const double> v,
                                      std::size_t m, bool conjugate) {
  auto plan = FftPlanCache::global().plan_double(L);
  std::vector<double> buf(L, 0.0);
  std::copy(v.begin(), v.end(), buf.begin());
  CVec spec(plan->spectrum_size());
  plan->forward(buf, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k] = sym[k] * (conjugate ? std::conj(spec[k]) : spec[k]);
  }
  plan->backward(spec, buf);
  buf.resize(m);
  return buf;
}

double at(std::span<const double> s, std::ptrdiff_t k) {
  return k >= 0 && static_cast<std::size_t>(k) < s.size() ? s[static_cast<std::size_t>(k)] : 0.0;
}

}  // namespace

std::vector<double> toeplitz_apply(std::span<const double> col, std::span<const double> row,
                                   std::span<const double> v, std::size_t m) {
  if (v.empty() || m == 0) return std::vector<double>(m, 0.0);
  const std::size_t L = next_smooth_size(m + v.size() - 1);
  const auto sym = circulant_spectrum(L, m, v.size(), [&](std::ptrdiff_t k) {
    return k >= 0 ? at(col, k) : at(row, -k);
  });
  return circulant_product(L, sym, v, m, false);
}

std::vector<double> toeplitz_apply(std::span<const double> symbol, std::span<const double> v,
                                   std::size_t m) {
  return toeplitz_apply(symbol, symbol, v, m);
}

std::vector<double> hankel_apply(std::span<const double> symbol, std::span<const double> v,
                                 std::size_t m) {
  if (v.empty() || m == 0) return std::vector<double>(m, 0.0);
  const std::size_t n = v.size();
  const std::size_t L = next_smooth_size(m + n - 1);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  const auto sym = circulant_spectrum(
      L, m, n, [&](std::ptrdiff_t k) { return at(symbol, k + nn - 1); }, n);
  return circulant_product(L, sym, v, m, true);
}

// --- JacobianApplicator -----------------------------------------------------

template <typename Real>
JacobianApplicator<Real>::JacobianApplicator(const OperatorSpec& op,
                                             std::span<const BoundaryRow> bcs, std::size_t n,
                                             FftPlanCache& cache)
    : n_(n), order_(op.order) {
  op.validate();
  const std::size_t N = static_cast<std::size_t>(op.order);
  if (N == 0) throw std::invalid_argument("JacobianApplicator: order must be at least 1");
  if (n <= N) throw std::invalid_argument("JacobianApplicator: n must exceed the order");
  if (bcs.size() != N) throw std::invalid_argument("JacobianApplicator: need N boundary rows");
  ext_ = n + N;
  fft_len_ = next_smooth_size(ext_ + n - 1);

  for (const auto& b : bcs) {
    std::vector<Real> r(n);
    for (std::size_t k = 0; k < n; ++k) r[k] = static_cast<Real>(b.entry(k));
    bc_rows_.push_back(std::move(r));
  }

  const std::size_t L = fft_len_;
  auto cast = [](const CVec& s) {
    std::vector<Complex> out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = Complex(static_cast<Real>(s[k].real()),
                                                                static_cast<Real>(s[k].imag()));
    return out;
  };
  bool any_fft = false;
  terms_.resize(N + 1);
  for (std::size_t l = 0; l <= N; ++l) {
    const std::vector<double>& a = op.coeffs[l];
    Term& t = terms_[l];
    if (a.size() <= 1) {
      t.constant = true;
      t.scalar = static_cast<Real>(a.empty() ? 0.0 : a[0]);
      continue;
    }
    t.constant = false;
    any_fft = true;
    const std::span<const double> as(a);
    // Toeplitz generator (1/2) t(|k|) with t_0 = 2 a_0, identical for M_0 and M_1
    auto toe = [&](std::ptrdiff_t k) {
      const std::ptrdiff_t kk = k < 0 ? -k : k;
      return kk == 0 ? as[0] : 0.5 * at(as, kk);
    };
    // Hankel generator: +(1/2) a_{i+j} for M_0, -(1/2) a_{i+j+2} for M_1
    const double hsign = l == 0 ? 0.5 : -0.5;
    const std::ptrdiff_t shift = l == 0 ? 0 : 2;
    const auto nn = static_cast<std::ptrdiff_t>(n), mm = static_cast<std::ptrdiff_t>(ext_);
    t.fwd_toeplitz = cast(circulant_spectrum(L, ext_, n, toe));
    t.fwd_hankel = cast(circulant_spectrum(
        L, ext_, n, [&](std::ptrdiff_t k) { return hsign * at(as, k + nn - 1 + shift); }, n));
    t.tr_toeplitz = cast(circulant_spectrum(L, n, ext_, toe));
    t.tr_hankel = cast(circulant_spectrum(
        L, n, ext_, [&](std::ptrdiff_t k) { return hsign * at(as, k + mm - 1 + shift); }, ext_));
    if (l == 0) {
      rank1_.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(std::min(a.size(), n)));
    }
  }
  if (any_fft) plan_ = cache.plan<Real>(L);
}

template <typename Real>
std::size_t JacobianApplicator<Real>::ffts_per_apply() const noexcept {
  std::size_t count = 0;
  bool any_high = false;
  for (std::size_t l = 0; l < terms_.size(); ++l) {
    if (terms_[l].constant) continue;
    if (l == 0) {
      count += 2;
    } else {
      count += 1;
      any_high = true;
    }
  }
  return count + (any_high ? 1 : 0);
}

template <typename Real>
void JacobianApplicator<Real>::check_size(std::size_t got, const char* what) const {
  if (got != n_) {
    throw std::invalid_argument(std::string("JacobianApplicator::") + what + ": expected length " +
                                std::to_string(n_) + ", got " + std::to_string(got));
  }
}

template <typename Real>
void JacobianApplicator<Real>::apply(std::span<const Real> v, std::span<Real> out) const {
  check_size(v.size(), "apply");
  check_size(out.size(), "apply");
  const std::size_t n = n_, N = static_cast<std::size_t>(order_), m = ext_, L = fft_len_;
  const std::size_t S = L / 2 + 1;
  std::vector<Real> y0(m, Real(0)), y1(m, Real(0)), buf(L, Real(0));
  std::vector<Complex> spec(plan_ ? S : 0), acc(plan_ ? S : 0, Complex(0));

  // lambda = 0: M_0[a^0] v in the T basis
  const Term& t0 = terms_[0];
  if (t0.constant) {
    for (std::size_t j = 0; j < n; ++j) y0[j] = t0.scalar * v[j];
  } else {
    std::copy(v.begin(), v.end(), buf.begin());
    plan_->forward(buf, spec);
    for (std::size_t k = 0; k < S; ++k) {
      spec[k] = t0.fwd_toeplitz[k] * spec[k] + t0.fwd_hankel[k] * std::conj(spec[k]);
    }
    plan_->backward(spec, buf);
    std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m), y0.begin());
    Real dot = 0;
    for (std::size_t j = 0; j < rank1_.size(); ++j) dot += rank1_[j] * v[j];
    y0[0] -= Real(0.5) * dot;
  }

  // lambda >= 1: M_1[a^lambda] S_1^{-1}...S_{lambda-1}^{-1} D_lambda v in C^(1)
  std::vector<Real> w(n), w2(n);
  bool any_high = false;
  for (std::size_t l = 1; l <= N; ++l) {
    const Term& t = terms_[l];
    apply_diff<Real>(static_cast<int>(l), v, w);
    for (std::size_t k = l - 1; k >= 1; --k) {
      apply_conv_inv<Real>(static_cast<int>(k), w, w2);
      std::swap(w, w2);
    }
    if (t.constant) {
      if (t.scalar != Real(0)) {
        for (std::size_t j = 0; j < n; ++j) y1[j] += t.scalar * w[j];
      }
      continue;
    }
    std::fill(buf.begin(), buf.end(), Real(0));
    std::copy(w.begin(), w.end(), buf.begin());
    plan_->forward(buf, spec);
    for (std::size_t k = 0; k < S; ++k) {
      acc[k] += t.fwd_toeplitz[k] * spec[k] + t.fwd_hankel[k] * std::conj(spec[k]);
    }
    any_high = true;
  }
  if (any_high) {
    plan_->backward(acc, buf);
    for (std::size_t i = 0; i < m; ++i) y1[i] += buf[i];
  }

  // S_0 y0 + y1, then S_1 ... S_{N-1}
  std::vector<Real> z(m - 2), z2(m - 2);
  apply_conv<Real>(0, y0, z);
  for (std::size_t i = 0; i < m - 2; ++i) z[i] += y1[i];
  std::size_t len = m - 2;
  for (std::size_t k = 1; k < N; ++k) {
    apply_conv<Real>(static_cast<int>(k), std::span<const Real>(z.data(), len),
                     std::span<Real>(z2.data(), len - 2));
    std::swap(z, z2);
    len -= 2;
  }

  for (std::size_t t = 0; t < N; ++t) {
    Real s = 0;
    const auto& r = bc_rows_[t];
    for (std::size_t j = 0; j < n; ++j) s += r[j] * v[j];
    out[t] = s;
  }
  for (std::size_t i = 0; i + N < n; ++i) out[N + i] = z[i];
}

template <typename Real>
void JacobianApplicator<Real>::transpose_apply(std::span<const Real> w, std::span<Real> out) const {
  check_size(w.size(), "transpose_apply");
  check_size(out.size(), "transpose_apply");
  const std::size_t n = n_, N = static_cast<std::size_t>(order_), m = ext_, L = fft_len_;
  const std::size_t S = L / 2 + 1;

  // (S_{N-1}...S_1)^T applied to the body part
  std::vector<Real> z(m, Real(0)), z2(m, Real(0));
  std::copy(w.begin() + static_cast<std::ptrdiff_t>(N), w.end(), z.begin());
  std::size_t len = n - N;
  for (std::size_t k = N - 1; k >= 1; --k) {
    apply_conv_transpose<Real>(static_cast<int>(k), std::span<const Real>(z.data(), len),
                               std::span<Real>(z2.data(), len + 2));
    std::swap(z, z2);
    len += 2;
  }
  // len == m - 2 here; entries of z beyond len are zero

  std::fill(out.begin(), out.end(), Real(0));
  std::vector<Real> buf(L, Real(0)), y(n), y2(n);
  std::vector<Complex> zspec(plan_ ? S : 0), spec(plan_ ? S : 0);
  bool have_zspec = false;

  for (std::size_t l = 1; l <= N; ++l) {
    const Term& t = terms_[l];
    if (t.constant) {
      if (t.scalar == Real(0)) continue;
      for (std::size_t j = 0; j < n; ++j) y[j] = t.scalar * z[j];
    } else {
      if (!have_zspec) {
        std::copy(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(len), buf.begin());
        plan_->forward(buf, zspec);
        have_zspec = true;
      }
      for (std::size_t k = 0; k < S; ++k) {
        spec[k] = t.tr_toeplitz[k] * zspec[k] + t.tr_hankel[k] * std::conj(zspec[k]);
      }
      plan_->backward(spec, buf);
      std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n), y.begin());
    }
    for (std::size_t k = 1; k < l; ++k) {
      apply_conv_inv_transpose<Real>(static_cast<int>(k), y, y2);
      std::swap(y, y2);
    }
    apply_diff_transpose<Real>(static_cast<int>(l), y, y2);
    for (std::size_t j = 0; j < n; ++j) out[j] += y2[j];
  }

  // lambda = 0 through S_0^T
  std::vector<Real> z0(m);
  apply_conv_transpose<Real>(0, std::span<const Real>(z.data(), len), z0);
  const Term& t0 = terms_[0];
  if (t0.constant) {
    if (t0.scalar != Real(0)) {
      for (std::size_t j = 0; j < n; ++j) out[j] += t0.scalar * z0[j];
    }
  } else {
    std::fill(buf.begin(), buf.end(), Real(0));
    std::copy(z0.begin(), z0.end(), buf.begin());
    plan_->forward(buf, spec);
    for (std::size_t k = 0; k < S; ++k) {
      spec[k] = t0.tr_toeplitz[k] * spec[k] + t0.tr_hankel[k] * std::conj(spec[k]);
    }
    plan_->backward(spec, buf);
    for (std::size_t j = 0; j < n; ++j) out[j] += buf[j];
    for (std::size_t j = 0; j < rank1_.size(); ++j) out[j] -= Real(0.5) * rank1_[j] * z0[0];
  }

  for (std::size_t t = 0; t < N; ++t) {
    const auto& r = bc_rows_[t];
    for (std::size_t j = 0; j < n; ++j) out[j] += w[t] * r[j];
  }
}

template <typename Real>
std::vector<Real> JacobianApplicator<Real>::apply(std::span<const Real> v) const {
  std::vector<Real> out(n_);
  apply(v, out);
  return out;
}

template <typename Real>
std::vector<Real> JacobianApplicator<Real>::transpose_apply(std::span<const Real> w) const {
  std::vector<Real> out(n_);
  transpose_apply(w, out);
  return out;
}

template class JacobianApplicator<float>;
template class JacobianApplicator<double>;

}  // namespace usn
