#include "opl/radial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "opl/errors.hpp"

namespace opl {

namespace {

GaussLegendreRule compute_rule(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

double log_chi_density(double r, int d) {
  const double half_d = 0.5 * d;
  return (d - 1) * std::log(r) - 0.5 * r * r - (half_d - 1.0) * std::numbers::ln2 - std::lgamma(half_d);
}

}  // namespace

const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussLegendreRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussLegendreRule>(compute_rule(n));
  return *slot;
}

double radial_expectation(const std::function<double(double)>& f, int d,
                          const RadialQuadratureOptions& opts) {
  if (d < 1) throw std::invalid_argument("radial_expectation: d must be >= 1");
  if (opts.nodes < 8) throw std::invalid_argument("radial_expectation: need at least 8 nodes");
  const double r_max = std::sqrt(static_cast<double>(d)) + 14.0;

  std::vector<double> edges{0.0, r_max};
  for (double u : opts.breakpoints) {
    if (u > 0.0) {
      const double r = std::sqrt(u);
      if (r < r_max) edges.push_back(r);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              edges.end());

  const int panels = static_cast<int>(edges.size()) - 1;
  const int min_nodes = 16;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = edges[static_cast<std::size_t>(p)];
    const double b = edges[static_cast<std::size_t>(p + 1)];
    const int n = std::max(min_nodes, static_cast<int>(std::lround(opts.nodes * (b - a) / r_max)));
    const auto& rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int k = 0; k < n; ++k) {
      const double r = mid + half * rule.nodes[static_cast<std::size_t>(k)];
      const double value = f(r * r);
      if (!std::isfinite(value)) throw NumericalError("radial_expectation: integrand is not finite at a node");
      total += half * rule.weights[static_cast<std::size_t>(k)] * value * std::exp(log_chi_density(r, d));
    }
  }
  return total;
}

double expected_rho(const RhoSpec& spec, int d, int nodes) {
  RadialQuadratureOptions opts;
  opts.nodes = nodes;
  opts.breakpoints = {truncation_squared(spec)};
  return radial_expectation([&](double u) { return rho_of_squared(spec, u).rho; }, d, opts);
}

double calibrate_c(int d, double bp, ArgumentConvention convention) {
  if (d < 1) throw std::invalid_argument("calibrate_c: d must be >= 1");
  if (!(bp > 0.0 && bp <= 0.5)) throw std::invalid_argument("calibrate_c: bp must lie in (0, 0.5]");
  auto excess = [&](double c) { return expected_rho(RhoSpec::tukey(c, convention), d) - bp; };

  // E rho_c decreases in c: from 1 as c -> 0 to 0 as c -> infinity.
  double lo = 1e-3;
  double hi = std::max(1.0, 2.0 * std::sqrt(static_cast<double>(d)));
  if (excess(lo) <= 0.0) throw NumericalError("calibrate_c: lower bracket does not enclose a root");
  constexpr double kBracketCap = 1e4;
  while (excess(hi) > 0.0) {
    hi *= 2.0;
    if (hi > kBracketCap) throw NumericalError("calibrate_c: no root below the bracket cap");
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace opl
