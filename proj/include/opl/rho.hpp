#pragma once

#include <string>

namespace opl {

enum class RhoFamily { TukeyBisquare };

/// Which quantity the loss is applied to.
///   SquaredDistance: rho(d^2), the M-estimation form.
///   ScaledDistance:  rho(d / s0) with s0 = 1, the S-estimation form.
enum class ArgumentConvention { SquaredDistance, ScaledDistance };

/// Bounded redescending loss with truncation constant c. sup rho = 1.
struct RhoSpec {
  RhoFamily family = RhoFamily::TukeyBisquare;
  double c = 1.0;
  ArgumentConvention convention = ArgumentConvention::SquaredDistance;

  void validate() const;

  static RhoSpec tukey(double c, ArgumentConvention conv) {
    return RhoSpec{RhoFamily::TukeyBisquare, c, conv};
  }
};

struct RhoValue {
  double rho = 0.0;
  double psi = 0.0;
  double psi_prime = 0.0;
};

/// rho_c(t) = min(3t^2/c^2 - 3t^4/c^4 + t^6/c^6, 1) together with its first two
/// derivatives in t. Total; continuous in t.
RhoValue rho_eval(const RhoSpec& spec, double t);

/// u(t) = psi(t)/t, extended by continuity at 0 (= psi'(0)).
double u_weight(const RhoSpec& spec, double t);

/// Loss expressed as a function of the squared distance u = d^2 under the
/// spec's convention; psi and psi_prime are derivatives with respect to u.
/// This is the form that enters the first-order condition
///   E[ psi(d^2) (X - m) ] = 0
/// for either convention.
RhoValue rho_of_squared(const RhoSpec& spec, double u);

/// Squared distance beyond which rho_of_squared is saturated (psi == 0).
double truncation_squared(const RhoSpec& spec);

/// Smallest t >= 0 with rho_c(t) = level, for level in [0, 1].
double rho_inverse(const RhoSpec& spec, double level);

std::string to_string(ArgumentConvention conv);
ArgumentConvention parse_convention(const std::string& name);

}  // namespace opl
