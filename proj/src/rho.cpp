#include "opl/rho.hpp"

#include <cmath>
#include <stdexcept>

namespace opl {

void RhoSpec::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("RhoSpec: c must be positive and finite");
}

RhoValue rho_eval(const RhoSpec& spec, double t) {
  const double c = spec.c;
  const double x = t / c;
  const double x2 = x * x;
  if (x2 >= 1.0) return {1.0, 0.0, 0.0};
  const double one_minus = 1.0 - x2;
  RhoValue v;
  v.rho = x2 * (3.0 - 3.0 * x2 + x2 * x2);
  v.psi = 6.0 * t / (c * c) * one_minus * one_minus;
  v.psi_prime = 6.0 / (c * c) * one_minus * (1.0 - 5.0 * x2);
  return v;
}

double u_weight(const RhoSpec& spec, double t) {
  const double x = t / spec.c;
  const double x2 = x * x;
  if (x2 >= 1.0) return 0.0;
  const double one_minus = 1.0 - x2;
  return 6.0 / (spec.c * spec.c) * one_minus * one_minus;
}

RhoValue rho_of_squared(const RhoSpec& spec, double u) {
  if (spec.convention == ArgumentConvention::SquaredDistance) return rho_eval(spec, u);
  // rho(sqrt(u)) is a cubic in s = u / c^2 on the support.
  const double c2 = spec.c * spec.c;
  const double s = u / c2;
  if (s >= 1.0) return {1.0, 0.0, 0.0};
  const double one_minus = 1.0 - s;
  RhoValue v;
  v.rho = s * (3.0 - 3.0 * s + s * s);
  v.psi = 3.0 / c2 * one_minus * one_minus;
  v.psi_prime = -6.0 / (c2 * c2) * one_minus;
  return v;
}

double truncation_squared(const RhoSpec& spec) {
  return spec.convention == ArgumentConvention::SquaredDistance ? spec.c : spec.c * spec.c;
}

double rho_inverse(const RhoSpec& spec, double level) {
  if (level < 0.0 || level > 1.0) throw std::invalid_argument("rho_inverse: level outside [0, 1]");
  if (level >= 1.0) return spec.c;
  // x^2 solves 3s - 3s^2 + s^3 = level, i.e. 1 - (1 - s)^3 = level.
  const double s = 1.0 - std::cbrt(1.0 - level);
  return spec.c * std::sqrt(s);
}

std::string to_string(ArgumentConvention conv) {
  return conv == ArgumentConvention::SquaredDistance ? "squared-distance" : "scaled-distance";
}

ArgumentConvention parse_convention(const std::string& name) {
  if (name == "squared-distance" || name == "squared") return ArgumentConvention::SquaredDistance;
  if (name == "scaled-distance" || name == "scaled") return ArgumentConvention::ScaledDistance;
  throw std::invalid_argument("unknown argument convention: " + name);
}

}  // namespace opl
