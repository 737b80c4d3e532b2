// SPDX-License-Identifier: Apache-2.0
#include "usn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace usn {

namespace {

using Params = std::map<std::string, double>;

PointRule constant_rule(double c) {
  return [c](double, std::span<const double>) { return c; };
}

// lower-branch parameter of u = 2 ln cosh c - 2 ln cosh(c x) for u'' + beta e^u = 0
double bratu_parameter(double beta) {
  constexpr double fold = 1.1996786402577338;  // c tanh c = 1
  const auto g = [](double c) { return 2.0 * c * c / std::pow(std::cosh(c), 2); };
  if (!(beta > 0.0 && beta <= g(fold))) return std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0, hi = fold;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < beta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Problem base(std::string name, std::string note, int order, Interval dom, Params params,
             std::vector<BoundaryCondition> bcs) {
  Problem p;
  p.name = std::move(name);
  p.note = std::move(note);
  p.order = order;
  p.domain = dom;
  p.params = std::move(params);
  p.bcs = std::move(bcs);
  p.coefficients.assign(static_cast<std::size_t>(order) + 1, constant_rule(0.0));
  return p;
}

void apply_overrides(Params& params, const Params& overrides, const std::string& name) {
  for (const auto& [key, value] : overrides) {
    auto it = params.find(key);
    if (it == params.end()) {
      throw std::invalid_argument("problem " + name + " has no parameter `" + key + "`");
    }
    if (!std::isfinite(value)) throw std::invalid_argument("parameter `" + key + "` must be finite");
    it->second = value;
  }
}

Problem build(const std::string& name, const Params& overrides) {
  auto with = [&](Params defaults) {
    apply_overrides(defaults, overrides, name);
    return defaults;
  };

  if (name == "blasius" || name == "falkner-skan") {
    const bool fs = name == "falkner-skan";
    Params pr = with({{"L", 10.0}});
    const double L = pr["L"];
    if (!(L > 0)) throw std::invalid_argument("L must be positive");
    Problem p = base(name, fs ? "an extension of the Blasius equation" : "boundary layer", 3, {0.0, L},
                     pr, {{-1, 0, 0.0}, {-1, 1, 0.0}, {1, 1, 1.0}});
    p.residual = [fs](double, std::span<const double> d) {
      double r = d[3] + 0.5 * d[0] * d[2];
      if (fs) r += 2.0 * (1.0 - d[1] * d[1]) / 3.0;
      return r;
    };
    p.coefficients[3] = constant_rule(1.0);
    p.coefficients[2] = [](double, std::span<const double> d) { return 0.5 * d[0]; };
    if (fs) p.coefficients[1] = [](double, std::span<const double> d) { return -4.0 * d[1] / 3.0; };
    p.coefficients[0] = [](double, std::span<const double> d) { return 0.5 * d[2]; };
    return p;
  }
  if (name == "fisher-kpp") {
    Problem p = base(name, "a perturbed reaction-diffusion equation", 2, {-4.0, 4.0}, with({}),
                     {{-1, 0, 1.0}, {1, 0, 0.0}});
    p.residual = [](double, std::span<const double> d) { return d[2] + d[0] * (1.0 - d[0]); };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[0] = [](double, std::span<const double> d) { return 1.0 - 2.0 * d[0]; };
    return p;
  }
  if (name == "fourth-order") {
    Problem p = base(name, "the equation of highest order in this collection", 4, {0.0, 1.0}, with({}),
                     {{-1, 0, 0.0}, {-1, 1, 0.0}, {1, 0, 1.0}, {1, 1, -5.0}});
    p.residual = [](double, std::span<const double> d) { return d[4] - d[1] * d[2] + d[0] * d[3]; };
    p.coefficients[4] = constant_rule(1.0);
    p.coefficients[3] = [](double, std::span<const double> d) { return d[0]; };
    p.coefficients[2] = [](double, std::span<const double> d) { return -d[1]; };
    p.coefficients[1] = [](double, std::span<const double> d) { return -d[2]; };
    p.coefficients[0] = [](double, std::span<const double> d) { return d[3]; };
    return p;
  }
  if (name == "bratu") {
    Params pr = with({{"beta", 0.875}});
    const double beta = pr["beta"];
    Problem p = base(name, "no solution when beta > 0.878; closed-form solution exists", 2, {-1.0, 1.0},
                     pr, {{-1, 0, 0.0}, {1, 0, 0.0}});
    p.residual = [beta](double, std::span<const double> d) { return d[2] + beta * std::exp(d[0]); };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[0] = [beta](double, std::span<const double> d) { return beta * std::exp(d[0]); };
    const double c = bratu_parameter(beta);
    if (std::isfinite(c)) {
      const double lc = std::log(std::cosh(c));
      p.exact = [c, lc](double x) { return 2.0 * lc - 2.0 * std::log(std::cosh(c * x)); };
    }
    return p;
  }
  if (name == "lane-emden") {
    Problem p = base(name, "an IVP solved as a BVP; closed-form solution exists", 2, {0.0, 10.0},
                     with({}), {{-1, 0, 1.0}, {-1, 1, 0.0}});
    p.residual = [](double x, std::span<const double> d) {
      return x * d[2] + 2.0 * d[1] + x * std::pow(d[0], 5);
    };
    p.coefficients[2] = [](double x, std::span<const double>) { return x; };
    p.coefficients[1] = constant_rule(2.0);
    p.coefficients[0] = [](double x, std::span<const double> d) { return 5.0 * x * std::pow(d[0], 4); };
    p.exact = [](double x) { return 1.0 / std::sqrt(1.0 + x * x / 3.0); };
    return p;
  }
  if (name == "gulf-stream") {
    Params pr = with({{"beta", -0.1}, {"L", 35.0}});
    const double beta = pr["beta"], L = pr["L"];
    if (!(L > 0)) throw std::invalid_argument("L must be positive");
    Problem p = base(name, "a conservation law holds for u", 3, {0.0, L}, pr,
                     {{-1, 0, 1.0}, {-1, 1, 0.0}, {1, 0, 1.0}});
    p.residual = [beta](double, std::span<const double> d) {
      return d[3] - beta * (d[1] * d[1] - d[0] * d[2]) - d[0] + 1.0;
    };
    p.coefficients[3] = constant_rule(1.0);
    p.coefficients[2] = [beta](double, std::span<const double> d) { return beta * d[0]; };
    p.coefficients[1] = [beta](double, std::span<const double> d) { return -2.0 * beta * d[1]; };
    p.coefficients[0] = [beta](double, std::span<const double> d) { return beta * d[2] - 1.0; };
    return p;
  }
  if (name == "interior-layer" || name == "boundary-layer") {
    const bool bl = name == "boundary-layer";
    Params pr = with({{"eps", 0.01}});
    const double eps = pr["eps"];
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    Problem p = base(name, bl ? "singularly perturbed, boundary layer" : "singularly perturbed by the leading coefficient",
                     2, {0.0, 1.0}, pr, {{-1, 0, -7.0 / 6.0}, {1, bl ? 1 : 0, 1.5}});
    p.residual = [eps, bl](double x, std::span<const double> d) {
      return eps * d[2] + d[0] * d[1] + (bl ? -x * d[0] : d[0]);
    };
    p.coefficients[2] = constant_rule(eps);
    p.coefficients[1] = [](double, std::span<const double> d) { return d[0]; };
    p.coefficients[0] = [bl](double x, std::span<const double> d) { return d[1] + (bl ? -x : 1.0); };
    return p;
  }
  if (name == "sawtooth") {
    Params pr = with({{"eps", 0.05}});
    const double eps = pr["eps"];
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    Problem p = base(name, "singularly perturbed, corner layer", 2, {-1.0, 1.0}, pr,
                     {{-1, 0, 0.8}, {1, 0, 1.2}});
    p.residual = [eps](double, std::span<const double> d) { return eps * d[2] + d[1] * d[1] - 1.0; };
    p.coefficients[2] = constant_rule(eps);
    p.coefficients[1] = [](double, std::span<const double> d) { return 2.0 * d[1]; };
    return p;
  }
  if (name == "allen-cahn") {
    Params pr = with({{"eps", 2.0}});
    const double eps = pr["eps"];
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    Problem p = base(name, "singularly perturbed steady state equation", 2, {0.0, 10.0}, pr,
                     {{-1, 0, 1.0}, {1, 0, -1.0}});
    p.residual = [eps](double x, std::span<const double> d) {
      return eps * d[2] + d[0] - d[0] * d[0] * d[0] - std::sin(x);
    };
    p.coefficients[2] = constant_rule(eps);
    p.coefficients[0] = [](double, std::span<const double> d) { return 1.0 - 3.0 * d[0] * d[0]; };
    return p;
  }
  if (name == "pendulum") {
    Problem p = base(name, "multiple solutions", 2, {0.0, 10.0}, with({}), {{-1, 0, 2.0}, {1, 0, 2.0}});
    p.residual = [](double, std::span<const double> d) { return d[2] + std::sin(d[0]); };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[0] = [](double, std::span<const double> d) { return std::cos(d[0]); };
    return p;
  }
  if (name == "carrier") {
    Params pr = with({{"eps", 0.01}});
    const double eps = pr["eps"];
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    Problem p = base(name, "singularly perturbed, multiple solutions", 2, {-1.0, 1.0}, pr,
                     {{-1, 0, 0.0}, {1, 0, 0.0}});
    p.residual = [eps](double x, std::span<const double> d) {
      return eps * d[2] + 2.0 * (1.0 - x * x) * d[0] + d[0] * d[0] - 1.0;
    };
    p.coefficients[2] = constant_rule(eps);
    p.coefficients[0] = [](double x, std::span<const double> d) { return 2.0 * (1.0 - x * x) + 2.0 * d[0]; };
    return p;
  }
  if (name == "painleve") {
    Params pr = with({{"L", 10.0}});
    const double L = pr["L"];
    if (!(L > 0)) throw std::invalid_argument("L must be positive");
    Problem p = base(name, "multiple solutions", 2, {0.0, L}, pr, {{-1, 0, 0.0}, {1, 0, std::sqrt(L)}});
    p.residual = [](double x, std::span<const double> d) { return d[2] - d[0] * d[0] + x; };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[0] = [](double, std::span<const double> d) { return -2.0 * d[0]; };
    return p;
  }
  if (name == "birkisson-1") {
    const double e = std::numbers::e;
    Problem p = base(name, "closed-form solution exists", 2, {0.0, std::numbers::pi / 2}, with({}),
                     {{-1, 0, 1.0}, {1, 0, e}});
    p.residual = [](double x, std::span<const double> d) {
      return d[2] - std::cos(x) * d[1] + d[0] * std::log(d[0]);
    };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[1] = [](double x, std::span<const double>) { return -std::cos(x); };
    p.coefficients[0] = [](double, std::span<const double> d) { return std::log(d[0]) + 1.0; };
    p.exact = [](double x) { return std::exp(std::sin(x)); };
    return p;
  }
  if (name == "birkisson-2") {
    Problem p = base(name, "closed-form solution exists", 2, {0.0, 2.5}, with({}),
                     {{-1, 0, std::sin(1.0)}, {1, 0, std::sin(std::exp(2.5))}});
    p.residual = [](double x, std::span<const double> d) {
      const double s = std::sin(std::exp(x));
      return d[2] - d[1] + std::exp(2.0 * x) * d[0] + d[0] * d[0] - s * s;
    };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[1] = constant_rule(-1.0);
    p.coefficients[0] = [](double x, std::span<const double> d) { return std::exp(2.0 * x) + 2.0 * d[0]; };
    p.exact = [](double x) { return std::sin(std::exp(x)); };
    return p;
  }
  if (name == "birkisson-3") {
    const double t3 = std::tanh(3.0);
    Problem p = base(name, "closed-form solution exists", 2, {-1.0, 1.0}, with({}),
                     {{-1, 0, -t3}, {1, 0, t3}});
    p.residual = [](double, std::span<const double> d) {
      return d[2] + 18.0 * (d[0] - d[0] * d[0] * d[0]);
    };
    p.coefficients[2] = constant_rule(1.0);
    p.coefficients[0] = [](double, std::span<const double> d) { return 18.0 * (1.0 - 3.0 * d[0] * d[0]); };
    p.exact = [](double x) { return std::tanh(3.0 * x); };
    return p;
  }
  throw UnknownProblem("unknown problem: " + name);
}

std::vector<const ChebSeries*> pointers(const std::vector<ChebSeries>& v) {
  std::vector<const ChebSeries*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

}  // namespace

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{
      "blasius",        "falkner-skan",   "fisher-kpp", "fourth-order", "bratu",
      "lane-emden",     "gulf-stream",    "interior-layer", "boundary-layer", "sawtooth",
      "allen-cahn",     "pendulum",       "carrier",    "painleve",     "birkisson-1",
      "birkisson-2",    "birkisson-3"};
  return names;
}

Problem make_problem(const std::string& name, const std::map<std::string, double>& overrides) {
  return build(name, overrides);
}

std::vector<ChebSeries> derivatives(const ChebSeries& u, int order) {
  std::vector<ChebSeries> d{u};
  for (int k = 1; k <= order; ++k) d.push_back(derivative(d.back(), 1));
  return d;
}

ChebSeries residual_function(const Problem& p, const ChebSeries& u) {
  if (!(u.domain() == p.domain)) throw std::invalid_argument("residual: iterate on the wrong domain");
  const auto d = derivatives(u, p.order);
  // the residual cancels near a solution; resolve it against the size of its parts
  double vscale = 0.0;
  for (const auto& s : d) vscale = std::max(vscale, s.max_abs_coeff());
  const std::vector<double> zeros(static_cast<std::size_t>(p.order) + 1, 0.0);
  for (double t : chebyshev_points(33)) {
    vscale = std::max(vscale, std::abs(p.residual(p.domain.from_unit(t), zeros)));
  }
  BuildOptions opts;
  opts.vscale = vscale;
  const auto in = pointers(d);
  return compose(std::span<const ChebSeries* const>(in), p.residual, opts);
}

std::vector<double> boundary_residuals(const Problem& p, const ChebSeries& u) {
  const auto rows = boundary_rows(p);
  std::vector<double> r(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) r[t] = rows[t].apply(u.coeffs()) - p.bcs[t].value;
  return r;
}

std::vector<double> convert_to_ultraspherical(std::span<const double> t, int order) {
  std::vector<double> a(t.begin(), t.end()), b(t.size());
  for (int l = 0; l < order; ++l) {
    apply_conv<double>(l, a, b);
    a.swap(b);
  }
  return a;
}

std::vector<double> residual_vector(const Problem& p, const ChebSeries& u) {
  std::vector<double> g = boundary_residuals(p, u);
  const ChebSeries f = residual_function(p, u);
  const auto body = convert_to_ultraspherical(f.coeffs(), p.order);
  g.insert(g.end(), body.begin(), body.end());
  return g;
}

std::vector<BoundaryRow> boundary_rows(const Problem& p) {
  std::vector<BoundaryRow> rows;
  const double s = p.domain.scale();
  for (const auto& bc : p.bcs) rows.push_back({bc.side, bc.order, std::pow(s, bc.order)});
  return rows;
}

OperatorSpec frechet_operator(const Problem& p, const ChebSeries& u) {
  if (!(u.domain() == p.domain)) throw std::invalid_argument("frechet: iterate on the wrong domain");
  const auto d = derivatives(u, p.order);
  const auto in = pointers(d);
  OperatorSpec op;
  op.order = p.order;
  const double s = p.domain.scale();
  for (int l = 0; l <= p.order; ++l) {
    const ChebSeries a = compose(std::span<const ChebSeries* const>(in), p.coefficients[static_cast<std::size_t>(l)]);
    std::vector<double> c(a.coeffs().begin(), a.coeffs().end());
    const double f = std::pow(s, l);
    for (double& v : c) v *= f;
    op.coeffs.push_back(std::move(c));
  }
  return op;
}

ChebSeries closed_form(const Problem& p) {
  if (!p.exact) throw std::invalid_argument("problem " + p.name + " has no closed-form solution");
  return build_from_function(p.exact, p.domain);
}

}  // namespace usn
