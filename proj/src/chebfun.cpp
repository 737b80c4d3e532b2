// SPDX-License-Identifier: Apache-2.0
#include "usn/chebfun.hpp"

#include "usn/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace usn {

ChebSeries::ChebSeries(std::vector<double> coeffs, Interval domain)
    : coeffs_(std::move(coeffs)), domain_(domain) {
  if (coeffs_.empty()) coeffs_.push_back(0.0);
  if (!(domain_.b > domain_.a)) throw std::invalid_argument("ChebSeries: empty domain");
}

ChebSeries ChebSeries::identity(Interval domain) {
  // x = (a+b)/2 + (b-a)/2 * t
  return ChebSeries({0.5 * (domain.a + domain.b), 0.5 * (domain.b - domain.a)}, domain);
}

double ChebSeries::operator()(double x) const { return evaluate(*this, x); }

double ChebSeries::max_abs_coeff() const noexcept {
  double m = 0.0;
  for (double c : coeffs_) m = std::max(m, std::abs(c));
  return m;
}

std::vector<double> chebyshev_points(std::size_t m) {
  if (m == 1) return {0.0};
  std::vector<double> x(m);
  const double h = std::numbers::pi / static_cast<double>(m - 1);
  for (std::size_t j = 0; j < m; ++j) {
    // sin form keeps the points exactly symmetric
    x[j] = std::sin(h * (0.5 * static_cast<double>(m - 1) - static_cast<double>(j)));
  }
  return x;
}

std::vector<double> values_on_grid(std::span<const double> coeffs, std::size_t m) {
  if (m < coeffs.size()) throw std::invalid_argument("values_on_grid: grid shorter than series");
  if (m == 1) return {coeffs.empty() ? 0.0 : coeffs[0]};
  const std::size_t big = 2 * (m - 1);
  auto plan = FftPlanCache::global().plan_double(big);
  std::vector<std::complex<double>> spec(m, 0.0);
  for (std::size_t k = 0; k < coeffs.size(); ++k) spec[k] = 0.5 * coeffs[k];
  spec[0] = coeffs.empty() ? 0.0 : coeffs[0];
  if (coeffs.size() == m) spec[m - 1] = coeffs[m - 1];
  std::vector<double> full(big);
  plan->backward(spec, full);
  full.resize(m);
  return full;
}

std::vector<double> coeffs_from_values(std::span<const double> values) {
  const std::size_t m = values.size();
  if (m <= 1) return {values.empty() ? 0.0 : values[0]};
  const std::size_t big = 2 * (m - 1);
  auto plan = FftPlanCache::global().plan_double(big);
  std::vector<double> ext(big);
  std::copy(values.begin(), values.end(), ext.begin());
  for (std::size_t j = 1; j + 1 < m; ++j) ext[big - j] = values[j];
  std::vector<std::complex<double>> spec(m);
  plan->forward(ext, spec);
  std::vector<double> c(m);
  const double inv = 1.0 / static_cast<double>(m - 1);
  for (std::size_t k = 0; k < m; ++k) c[k] = spec[k].real() * inv;
  c[0] *= 0.5;
  c[m - 1] *= 0.5;
  return c;
}

double clenshaw(std::span<const double> c, double t) noexcept {
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) {
    const double b0 = c[k] + 2.0 * t * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return (c.empty() ? 0.0 : c[0]) + t * b1 - b2;
}

double evaluate(const ChebSeries& u, double x) {
  const double t = u.domain().to_unit(x);
  if (std::abs(t) > 1.0 + 1e-12) throw std::out_of_range("evaluate: point outside domain");
  return clenshaw(u.coeffs(), std::clamp(t, -1.0, 1.0));
}

std::vector<double> chop_coeffs(std::span<const double> c, double threshold) {
  std::size_t keep = c.size();
  while (keep > 1 && !(std::abs(c[keep - 1]) > threshold)) --keep;
  return {c.begin(), c.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(keep, 1))};
}

ChebSeries chop(const ChebSeries& u, double tol) {
  return ChebSeries(chop_coeffs(u.coeffs(), tol * u.max_abs_coeff()), u.domain());
}

namespace {

struct TailState {
  bool resolved = false;
  double floor = 0.0;  // noise floor when resolved by plateau, else 0
};

// Resolution test on one grid: the upper half of the spectrum is either below
// tol * vscale, or it is a flat rounding-level floor.
TailState tail_state(std::span<const double> c, double tol, double vscale) {
  const std::size_t m = c.size();
  const std::size_t half = m / 2;
  double upper = 0.0, q1 = 0.0, q2 = 0.0;
  for (std::size_t k = half; k < m; ++k) {
    const double a = std::abs(c[k]);
    upper = std::max(upper, a);
    if (k < half + (m - half) / 2) {
      q1 = std::max(q1, a);
    } else {
      q2 = std::max(q2, a);
    }
  }
  if (upper <= tol * vscale) return {true, 0.0};
  constexpr double kNoiseRel = 1e3 * 2.220446049250313e-16;
  if (upper <= kNoiseRel * vscale && q1 <= 10.0 * q2) return {true, upper};
  return {};
}

template <typename Sampler>
ChebSeries adaptive_build(Sampler&& sample, Interval domain, const BuildOptions& opts,
                          std::size_t start_hint) {
  if (!(opts.tol > 0.0 && opts.tol < 1.0)) throw std::invalid_argument("build: tol must lie in (0,1)");
  std::size_t m = 17;
  while (m < std::max(opts.min_size, start_hint)) m = 2 * m - 1;
  bool prev_resolved = false;
  while (m <= opts.max_size) {
    std::vector<double> vals = sample(m);
    for (double v : vals) {
      if (!std::isfinite(v)) throw DomainError("build: non-finite sample");
    }
    std::vector<double> c = coeffs_from_values(vals);
    double cmax = 0.0;
    for (double a : c) cmax = std::max(cmax, std::abs(a));
    const double vscale = std::max(cmax, opts.vscale);
    if (vscale == 0.0) return ChebSeries({0.0}, domain);
    const TailState st = tail_state(c, opts.tol, vscale);
    if (st.resolved && prev_resolved) {
      const double thr = std::max(opts.tol * vscale, 2.0 * st.floor);
      return ChebSeries(chop_coeffs(c, thr), domain);
    }
    prev_resolved = st.resolved;
    m = 2 * m - 1;
  }
  std::ostringstream msg;
  msg << "build: function not resolved on " << opts.max_size << " points";
  throw ResolutionError(msg.str());
}

}  // namespace

ChebSeries build_from_function(const std::function<double(double)>& f, Interval domain,
                               const BuildOptions& opts) {
  std::vector<double> prev;
  auto sample = [&](std::size_t m) {
    const auto t = chebyshev_points(m);
    std::vector<double> v(m);
    const bool nested = !prev.empty() && 2 * (prev.size() - 1) == m - 1;
    for (std::size_t j = 0; j < m; ++j) {
      if (nested && j % 2 == 0) {
        v[j] = prev[j / 2];
      } else {
        v[j] = f(domain.from_unit(t[j]));
      }
    }
    prev = v;
    return v;
  };
  return adaptive_build(sample, domain, opts, 0);
}

ChebSeries compose(const ChebSeries& u, const std::function<double(double)>& g,
                   const BuildOptions& opts) {
  const ChebSeries* in[] = {&u};
  return compose(std::span<const ChebSeries* const>(in),
                 [&g](double, std::span<const double> v) { return g(v[0]); }, opts);
}

ChebSeries compose(std::initializer_list<const ChebSeries*> inputs, const PointwiseFn& g,
                   const BuildOptions& opts) {
  return compose(std::span<const ChebSeries* const>(inputs.begin(), inputs.size()), g, opts);
}

ChebSeries compose(std::span<const ChebSeries* const> inputs, const PointwiseFn& g,
                   const BuildOptions& opts) {
  if (inputs.empty()) throw std::invalid_argument("compose: no inputs");
  const Interval domain = inputs[0]->domain();
  std::size_t longest = 1;
  for (const ChebSeries* s : inputs) {
    if (!(s->domain() == domain)) throw std::invalid_argument("compose: domain mismatch");
    longest = std::max(longest, s->length());
  }
  auto sample = [&](std::size_t m) {
    std::vector<std::vector<double>> vals;
    vals.reserve(inputs.size());
    for (const ChebSeries* s : inputs) vals.push_back(values_on_grid(s->coeffs(), m));
    const auto t = chebyshev_points(m);
    std::vector<double> out(m), args(inputs.size());
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < inputs.size(); ++i) args[i] = vals[i][j];
      out[j] = g(domain.from_unit(t[j]), args);
    }
    return out;
  };
  return adaptive_build(sample, domain, opts, longest);
}

ChebSeries linear_combination(std::initializer_list<Term> terms, double tol) {
  return linear_combination(std::span<const Term>(terms.begin(), terms.size()), tol);
}

ChebSeries linear_combination(std::span<const Term> terms, double tol) {
  if (terms.empty()) return ChebSeries();
  const Interval domain = terms[0].series->domain();
  std::size_t len = 1;
  double scale = 0.0;
  for (const Term& t : terms) {
    if (!(t.series->domain() == domain)) throw std::invalid_argument("linear_combination: domain mismatch");
    len = std::max(len, t.series->length());
    scale = std::max(scale, std::abs(t.scale) * t.series->max_abs_coeff());
  }
  std::vector<double> c(len, 0.0);
  for (const Term& t : terms) {
    const auto s = t.series->coeffs();
    for (std::size_t k = 0; k < s.size(); ++k) c[k] += t.scale * s[k];
  }
  return ChebSeries(chop_coeffs(c, tol * scale), domain);
}

ChebSeries derivative(const ChebSeries& u, int order) {
  if (order < 0) throw std::invalid_argument("derivative: negative order");
  std::vector<double> c(u.coeffs().begin(), u.coeffs().end());
  const double s = u.domain().scale();
  for (int r = 0; r < order; ++r) {
    const std::size_t n = c.size();
    if (n <= 1) {
      c.assign(1, 0.0);
      break;
    }
    std::vector<double> d(n - 1, 0.0);
    // c'_{k-1} = c'_{k+1} + 2 k c_k
    for (std::size_t k = n - 1; k >= 1; --k) {
      const double next = (k + 1 < n - 1) ? d[k + 1] : 0.0;
      d[k - 1] = next + 2.0 * static_cast<double>(k) * c[k];
    }
    d[0] *= 0.5;
    for (double& v : d) v *= s;
    c = std::move(d);
  }
  return ChebSeries(std::move(c), u.domain());
}

void write_coefficients_csv(std::ostream& os, std::span<const double> coeffs) {
  os << "k,coeff\n";
  char buf[64];
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, coeffs[k]);
    os << buf;
  }
}

std::vector<double> read_coefficients_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("k,coeff", 0) != 0) {
    throw std::runtime_error("coefficient csv: missing `k,coeff` header");
  }
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("coefficient csv: malformed row");
    const std::size_t k = std::stoul(line.substr(0, comma));
    if (k != out.size()) throw std::runtime_error("coefficient csv: rows out of order");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace usn
