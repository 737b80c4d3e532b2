// SPDX-License-Identifier: Apache-2.0
#include "usn/almostbanded.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace usn {

int bandwidth_rule(std::size_t n) {
  if (n < 2) throw std::invalid_argument("bandwidth_rule: n must be at least 2");
  int p = static_cast<int>(std::floor(std::sqrt(std::log2(static_cast<double>(n)))));
  // guard against rounding just below a perfect square
  while (static_cast<double>((p + 1) * (p + 1)) <= std::log2(static_cast<double>(n))) ++p;
  return std::max(p, 1);
}

// --- AlmostBandedMatrix -----------------------------------------------------

AlmostBandedMatrix::AlmostBandedMatrix(std::size_t n, std::size_t dense_rows, std::size_t lower,
                                       std::size_t upper)
    : n_(n), nd_(dense_rows), lo_(lower), up_(upper), width_(lower + upper + 1) {
  if (dense_rows > n) throw std::invalid_argument("AlmostBandedMatrix: too many dense rows");
  dense_.assign(nd_ * n_, 0.0);
  band_.assign((n_ - nd_) * width_, 0.0);
}

bool AlmostBandedMatrix::in_structure(std::size_t i, std::size_t j) const noexcept {
  if (i >= n_ || j >= n_) return false;
  if (i < nd_) return true;
  return j + lo_ >= i && j <= i + up_;
}

double AlmostBandedMatrix::operator()(std::size_t i, std::size_t j) const noexcept {
  if (!in_structure(i, j)) return 0.0;
  if (i < nd_) return dense_[i * n_ + j];
  return band_[(i - nd_) * width_ + (j + lo_ - i)];
}

double& AlmostBandedMatrix::at(std::size_t i, std::size_t j) {
  if (!in_structure(i, j)) {
    std::ostringstream msg;
    msg << "AlmostBandedMatrix: entry (" << i << ", " << j << ") outside structure";
    throw std::out_of_range(msg.str());
  }
  if (i < nd_) return dense_[i * n_ + j];
  return band_[(i - nd_) * width_ + (j + lo_ - i)];
}

void AlmostBandedMatrix::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != n_) throw std::invalid_argument("AlmostBandedMatrix::apply: size");
  for (std::size_t t = 0; t < nd_; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += dense_[t * n_ + j] * x[j];
    y[t] = s;
  }
  for (std::size_t i = nd_; i < n_; ++i) {
    const std::size_t j0 = i >= lo_ ? i - lo_ : 0, j1 = std::min(n_ - 1, i + up_);
    double s = 0.0;
    for (std::size_t j = j0; j <= j1; ++j) s += band_[(i - nd_) * width_ + (j + lo_ - i)] * x[j];
    y[i] = s;
  }
}

double AlmostBandedMatrix::norm_inf() const noexcept {
  double m = 0.0;
  for (std::size_t t = 0; t < nd_; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += std::abs(dense_[t * n_ + j]);
    m = std::max(m, s);
  }
  for (std::size_t i = nd_; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < width_; ++k) s += std::abs(band_[(i - nd_) * width_ + k]);
    m = std::max(m, s);
  }
  return m;
}

DenseMatrix AlmostBandedMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (in_structure(i, j)) d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
    }
  }
  return d;
}

// --- preconditioner assembly -----------------------------------------------

namespace {

// Rectangular banded block: row i stores columns i + [omin, omax].
struct Band {
  std::size_t rows = 0, cols = 0;
  std::ptrdiff_t omin = 0, omax = 0;
  std::vector<double> data;

  Band(std::size_t r, std::size_t c, std::ptrdiff_t lo, std::ptrdiff_t hi)
      : rows(r), cols(c), omin(lo), omax(hi), data(r * static_cast<std::size_t>(hi - lo + 1), 0.0) {}
  std::size_t w() const { return static_cast<std::size_t>(omax - omin + 1); }
  bool has(std::size_t i, std::ptrdiff_t j) const {
    const std::ptrdiff_t o = j - static_cast<std::ptrdiff_t>(i);
    return i < rows && j >= 0 && static_cast<std::size_t>(j) < cols && o >= omin && o <= omax;
  }
  double get(std::size_t i, std::ptrdiff_t j) const {
    return has(i, j) ? data[i * w() + static_cast<std::size_t>(j - static_cast<std::ptrdiff_t>(i) - omin)] : 0.0;
  }
  double& ref(std::size_t i, std::ptrdiff_t j) {
    return data[i * w() + static_cast<std::size_t>(j - static_cast<std::ptrdiff_t>(i) - omin)];
  }
};

// S_{N-1}...S_lambda M_lambda[a] D_lambda on `rows` x n, for a in T form of degree d.
Band banded_term(const std::vector<double>& a, int lambda, int N, std::size_t rows, std::size_t n) {
  const auto d = static_cast<std::ptrdiff_t>(a.size() - 1);
  const std::size_t m0_rows = rows + 2 * static_cast<std::size_t>(N);
  auto coeff = [&](std::size_t k) { return k < a.size() ? a[k] : 0.0; };

  Band m(m0_rows, n, -d, d);
  for (std::size_t i = 0; i < m0_rows; ++i) {
    for (std::ptrdiff_t o = -d; o <= d; ++o) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + o;
      if (!m.has(i, j)) continue;
      const auto ju = static_cast<std::size_t>(j);
      const std::size_t dist = static_cast<std::size_t>(o < 0 ? -o : o);
      double v = dist == 0 ? 2.0 * coeff(0) : coeff(dist);
      v += coeff(i + ju);
      if (i == 0) v -= coeff(ju);
      m.ref(i, j) = 0.5 * v;
    }
  }
  // M_k S_{k-1} = S_{k-1} M_{k-1}, column recursion inside the band
  for (int k = 1; k <= lambda; ++k) {
    Band x(m.rows - 2, n, -d, d);
    for (std::size_t j = 0; j < n; ++j) {
      const double sjj = conv_diag(k - 1, j);
      const double sup = j >= 2 ? conv_super(k - 1, j - 2) : 0.0;
      const auto jj = static_cast<std::ptrdiff_t>(j);
      const std::size_t i0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, jj - d));
      const std::size_t i1 = std::min<std::size_t>(x.rows, j + static_cast<std::size_t>(d) + 1);
      for (std::size_t i = i0; i < i1; ++i) {
        const double b = conv_diag(k - 1, i) * m.get(i, jj) + conv_super(k - 1, i) * m.get(i + 2, jj);
        const double prev = j >= 2 ? x.get(i, jj - 2) : 0.0;
        x.ref(i, jj) = (b - sup * prev) / sjj;
      }
    }
    m = std::move(x);
  }
  // right multiplication by D_lambda: column j takes column j - lambda scaled by c j
  Band t(m.rows, n, -d + lambda, d + lambda);
  const double sc = static_cast<double>(diff_scale(lambda));
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::ptrdiff_t o = t.omin; o <= t.omax; ++o) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + o;
      if (!t.has(i, j)) continue;
      t.ref(i, j) = lambda == 0 ? m.get(i, j) : sc * static_cast<double>(j) * m.get(i, j - lambda);
    }
  }
  // left conversions S_lambda ... S_{N-1}
  for (int k = lambda; k < N; ++k) {
    Band y(t.rows - 2, n, t.omin, t.omax + 2);
    for (std::size_t i = 0; i < y.rows; ++i) {
      for (std::ptrdiff_t o = y.omin; o <= y.omax; ++o) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + o;
        if (!y.has(i, j)) continue;
        y.ref(i, j) = conv_diag(k, i) * t.get(i, j) + conv_super(k, i) * t.get(i + 2, j);
      }
    }
    t = std::move(y);
  }
  return t;
}

}  // namespace

AlmostBandedMatrix build_preconditioner(const OperatorSpec& op, std::span<const BoundaryRow> bcs,
                                        std::size_t n, int p) {
  op.validate();
  const int N = op.order;
  const auto Nu = static_cast<std::size_t>(N);
  if (n <= Nu) throw std::invalid_argument("build_preconditioner: n must exceed the order");
  if (bcs.size() != Nu) throw std::invalid_argument("build_preconditioner: need N boundary rows");
  if (p < 0) throw std::invalid_argument("build_preconditioner: negative bandwidth");
  const std::size_t pu = static_cast<std::size_t>(p);
  AlmostBandedMatrix w(n, Nu, pu + Nu, pu + Nu);
  for (std::size_t t = 0; t < Nu; ++t) {
    auto row = w.dense_row(t);
    for (std::size_t k = 0; k < n; ++k) row[k] = bcs[t].entry(k);
  }
  const std::size_t body = n - Nu;
  for (int lambda = 0; lambda <= N; ++lambda) {
    // truncate the C^(lambda) expansion to p + lambda + 1 terms, back to T form
    MultCoeffs ul = chebyshev_to_ultraspherical({op.coeffs[static_cast<std::size_t>(lambda)], 0}, lambda);
    const std::size_t keep = std::min(ul.coeffs.size(), pu + static_cast<std::size_t>(lambda) + 1);
    ul.coeffs.resize(keep);
    const std::vector<double> a = mlambda_chebyshev_coeffs(ul).coeffs;
    const Band t = banded_term(a, lambda, N, body, n);
    for (std::size_t r = 0; r < body; ++r) {
      for (std::ptrdiff_t o = t.omin; o <= t.omax; ++o) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(r) + o;
        if (!t.has(r, j)) continue;
        const double v = t.get(r, j);
        if (v == 0.0) continue;
        w.at(r + Nu, static_cast<std::size_t>(j)) += v;
      }
    }
  }
  return w;
}

// --- QR -----------------------------------------------------------------

AlmostBandedQR::AlmostBandedQR(const AlmostBandedMatrix& w)
    : n_(w.size()), nd_(w.dense_rows()), lo_(w.lower()), up_(w.upper()) {
  const std::size_t n = n_, nd = nd_, l = std::max<std::size_t>(lo_, 1), u = up_;
  lo_ = l;
  width_ = 2 * l + u + 1;
  const std::size_t W = width_;
  auto& F = fd_;
  F.rows.assign(n * W, 0.0);
  F.alpha.assign(n * nd, 0.0);
  F.dense.assign(nd * n, 0.0);
  F.cs.assign(n * l * 2, 0.0);
  for (std::size_t t = 0; t < nd; ++t) {
    const auto r = w.dense_row(t);
    std::copy(r.begin(), r.end(), F.dense.begin() + static_cast<std::ptrdiff_t>(t * n));
    F.alpha[t * nd + t] = 1.0;
  }
  // explicit window of row i: columns [i - l, i + l + u]
  auto lo_col = [&](std::size_t i) { return static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(l); };
  auto hi_col = [&](std::size_t i) { return i + l + u; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < W; ++k) {
      const std::ptrdiff_t c = lo_col(i) + static_cast<std::ptrdiff_t>(k);
      if (c >= 0 && static_cast<std::size_t>(c) < n) F.rows[i * W + k] = w(i, static_cast<std::size_t>(c));
    }
  }
  auto tail_value = [&](std::size_t i, std::size_t c) {
    double s = 0.0;
    for (std::size_t t = 0; t < nd; ++t) s += F.alpha[i * nd + t] * F.dense[t * n + c];
    return s;
  };
  auto slot = [&](std::size_t i, std::size_t c) -> double& {
    return F.rows[i * W + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) - lo_col(i))];
  };
  auto value = [&](std::size_t i, std::size_t c) {
    return c <= hi_col(i) ? slot(i, c) : tail_value(i, c);
  };

  const double wnorm = w.norm_inf();
  // unpivoted QR does not reveal rank; check the dense block separately
  if (nd > 0) {
    Eigen::MatrixXd top(static_cast<Eigen::Index>(nd), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < nd; ++t) {
      for (std::size_t c = 0; c < n; ++c) {
        top(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = F.dense[t * n + c];
      }
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> piv(top);
    const double last = std::abs(piv.matrixR()(static_cast<Eigen::Index>(nd - 1),
                                              static_cast<Eigen::Index>(nd - 1)));
    if (!(last >= 1e-14 * wnorm)) {
      std::ostringstream msg;
      msg << "almost-banded QR: dense rows are rank deficient (" << last << " against ||W||_inf = "
          << wnorm << ")";
      throw SingularPreconditioner(msg.str());
    }
  }
  min_pivot_ = std::numeric_limits<double>::infinity();
  std::uint64_t flops = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t last = std::min(n - 1, k + l);
    for (std::size_t i = last; i > k; --i) {
      const double a = value(i - 1, k), b = slot(i, k);
      double& cc = F.cs[(k * l + (last - i)) * 2];
      double& ss = F.cs[(k * l + (last - i)) * 2 + 1];
      if (b == 0.0) {
        cc = 1.0;
        ss = 0.0;
        continue;
      }
      const double r = std::hypot(a, b);
      const double c = a / r, s = b / r;
      cc = c;
      ss = s;
      const std::size_t cend = std::min(n - 1, hi_col(i));
      for (std::size_t col = k; col <= cend; ++col) {
        const double x = value(i - 1, col), y = slot(i, col);
        if (col <= hi_col(i - 1)) slot(i - 1, col) = c * x + s * y;
        slot(i, col) = -s * x + c * y;
      }
      for (std::size_t t = 0; t < nd; ++t) {
        const double x = F.alpha[(i - 1) * nd + t], y = F.alpha[i * nd + t];
        F.alpha[(i - 1) * nd + t] = c * x + s * y;
        F.alpha[i * nd + t] = -s * x + c * y;
      }
      slot(i, k) = 0.0;
      flops += 6 * (cend - k + 1 + nd) + 2 * nd + 6;
    }
    const double piv = std::abs(slot(k, k));
    min_pivot_ = std::min(min_pivot_, wnorm > 0 ? piv / wnorm : 0.0);
    if (!(piv >= 1e-14 * wnorm) || wnorm == 0.0) {
      std::ostringstream msg;
      msg << "almost-banded QR: pivot " << k << " is " << piv << " against ||W||_inf = " << wnorm;
      throw SingularPreconditioner(msg.str());
    }
  }
  flops_ = flops;

  auto& G = ff_;
  auto to_float = [](const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); };
  G.rows = to_float(F.rows);
  G.alpha = to_float(F.alpha);
  G.dense = to_float(F.dense);
  G.cs = to_float(F.cs);
}

template <>
const AlmostBandedQR::Factors<double>& AlmostBandedQR::factors<double>() const {
  return fd_;
}
template <>
const AlmostBandedQR::Factors<float>& AlmostBandedQR::factors<float>() const {
  return ff_;
}

template <typename Real>
void AlmostBandedQR::solve_in_place(std::span<Real> b) const {
  if (b.size() != n_) throw std::invalid_argument("AlmostBandedQR::solve: size mismatch");
  const auto& F = factors<Real>();
  const std::size_t n = n_, nd = nd_, l = lo_, u = up_, W = width_;
  // Q^T b
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t last = std::min(n - 1, k + l);
    for (std::size_t i = last; i > k; --i) {
      const Real c = F.cs[(k * l + (last - i)) * 2], s = F.cs[(k * l + (last - i)) * 2 + 1];
      const Real x = b[i - 1], y = b[i];
      b[i - 1] = c * x + s * y;
      b[i] = -s * x + c * y;
    }
  }
  // R x = Q^T b; columns beyond row k's window enter through sigma_t
  std::vector<Real> sigma(nd, Real(0));
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t edge = k + l + u + 1;  // first column handled by alpha
    if (edge < n) {
      for (std::size_t t = 0; t < nd; ++t) sigma[t] += F.dense[t * n + edge] * b[edge];
    }
    const Real* row = F.rows.data() + k * W;  // row[c - k + l]
    Real s = b[k];
    const std::size_t cend = std::min(n - 1, k + l + u);
    for (std::size_t c = k + 1; c <= cend; ++c) s -= row[c + l - k] * b[c];
    for (std::size_t t = 0; t < nd; ++t) s -= F.alpha[k * nd + t] * sigma[t];
    b[k] = s / row[l];
  }
}

template void AlmostBandedQR::solve_in_place<float>(std::span<float>) const;
template void AlmostBandedQR::solve_in_place<double>(std::span<double>) const;

std::vector<double> AlmostBandedQR::solve(std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  solve_in_place<double>(x);
  return x;
}

// --- RightPreconditioner ---------------------------------------------------

RightPreconditioner RightPreconditioner::identity(std::size_t n) {
  RightPreconditioner p;
  p.n_ = n;
  return p;
}

RightPreconditioner RightPreconditioner::from_matrix(const AlmostBandedMatrix& w) {
  RightPreconditioner p;
  p.n_ = w.size();
  try {
    p.qr_ = std::make_shared<const AlmostBandedQR>(w);
  } catch (const SingularPreconditioner& e) {
    std::clog << "warning: " << e.what() << "; using the diagonal preconditioner\n";
    p.diag_.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w(i, i);
      p.diag_[i] = d != 0.0 ? d : 1.0;
    }
  }
  return p;
}

RightPreconditioner RightPreconditioner::build(const OperatorSpec& op,
                                               std::span<const BoundaryRow> bcs, std::size_t n,
                                               int p) {
  return from_matrix(build_preconditioner(op, bcs, n, p));
}

template <typename Real>
void RightPreconditioner::solve_in_place(std::span<Real> b) const {
  if (b.size() != n_) throw std::invalid_argument("RightPreconditioner::solve: size mismatch");
  if (qr_) {
    qr_->solve_in_place<Real>(b);
  } else if (!diag_.empty()) {
    for (std::size_t i = 0; i < n_; ++i) b[i] /= static_cast<Real>(diag_[i]);
  }
}

template void RightPreconditioner::solve_in_place<float>(std::span<float>) const;
template void RightPreconditioner::solve_in_place<double>(std::span<double>) const;

}  // namespace usn
