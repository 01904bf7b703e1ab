#pragma once

#include <functional>
#include <vector>

#include "opl/rho.hpp"

namespace opl {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule. Rules are computed once per n and cached.
const GaussLegendreRule& gauss_legendre(int n);

struct RadialQuadratureOptions {
  int nodes = 256;
  /// Points (in u = |w|^2) where the integrand has a kink; panels are split there.
  std::vector<double> breakpoints;
};

/// E[f(|w|^2)] for w ~ N(0, I_d), i.e. u ~ chi-square(d).
///
/// Integrates in the radius r = sqrt(u) against the chi(d) density, which is
/// smooth at the origin for every d. The range [0, sqrt(d) + 14] is split at the
/// breakpoints and each panel receives Gauss-Legendre nodes in proportion to
/// its length. Throws NumericalError when f is not finite at a node.
double radial_expectation(const std::function<double(double)>& f, int d,
                          const RadialQuadratureOptions& opts = {});

/// E[rho_c(argument)] under the standard spherical Gaussian model, where the
/// argument is |w|^2 or |w| according to the convention.
double expected_rho(const RhoSpec& spec, int d, int nodes = 256);

/// Truncation constant c such that E[rho_c] = bp at the standard model, so an
/// S-functional with constraint level b = bp has breakdown point bp.
/// Bisection to 1e-10 in c, at most 200 iterations; the upper bracket is
/// doubled up to c = 1e4 before giving up.
double calibrate_c(int d, double bp, ArgumentConvention convention);

}  // namespace opl
