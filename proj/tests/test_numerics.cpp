#include <doctest.h>

#include <cmath>
#include <random>

#include "opl/errors.hpp"
#include "opl/geometry.hpp"
#include "opl/radial.hpp"
#include "opl/rho.hpp"

using namespace opl;

namespace {

const RhoSpec kRootSixSquared = RhoSpec::tukey(std::sqrt(6.0), ArgumentConvention::SquaredDistance);

struct McMean {
  double mean;
  double se;
};

// Plain Monte Carlo over |w|^2 for w ~ N(0, I_d).
template <class F>
McMean mc_chi2(F f, int d, int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = 0;
    for (int k = 0; k < d; ++k) {
      const double w = normal(eng);
      u += w * w;
    }
    const double v = f(u);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / n)};
}

Matrix random_spd(int d, std::mt19937_64& eng) {
  std::normal_distribution<double> normal;
  Matrix A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = normal(eng);
  return A * A.transpose() + 0.5 * Matrix::Identity(d, d);
}

}  // namespace

TEST_CASE("rho closed form values") {
  const RhoSpec r = kRootSixSquared;
  CHECK(rho_eval(r, 0.0).rho == 0.0);
  CHECK(rho_eval(r, 0.0).psi == 0.0);
  CHECK(rho_eval(r, std::sqrt(6.0)).rho == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rho_eval(r, std::sqrt(6.0)).psi == doctest::Approx(0.0));
  CHECK(rho_eval(r, 1.0).rho == doctest::Approx(0.42129629629629634).epsilon(1e-14));
  CHECK(rho_eval(r, 10.0).rho == 1.0);
  CHECK(rho_eval(r, -1.0).rho == rho_eval(r, 1.0).rho);
}

TEST_CASE("psi and psi' agree with finite differences") {
  for (double c : {1.0, std::sqrt(6.0), 4.7}) {
    const RhoSpec r = RhoSpec::tukey(c, ArgumentConvention::ScaledDistance);
    const double h = 1e-6;
    for (int i = 0; i < 1000; ++i) {
      const double t = 2.0 * c * (i + 0.5) / 1000.0;  // offset grid, psi' has a kink at c
      const double fd_rho = (rho_eval(r, t + h).rho - rho_eval(r, t - h).rho) / (2 * h);
      const double fd_psi = (rho_eval(r, t + h).psi - rho_eval(r, t - h).psi) / (2 * h);
      CHECK(std::abs(fd_rho - rho_eval(r, t).psi) < 1e-6);
      CHECK(std::abs(fd_psi - rho_eval(r, t).psi_prime) < 1e-6);
    }
  }
}

TEST_CASE("squared-form derivatives in u") {
  for (auto conv : {ArgumentConvention::SquaredDistance, ArgumentConvention::ScaledDistance}) {
    const RhoSpec r = RhoSpec::tukey(2.3, conv);
    const double h = 1e-6;
    for (int i = 1; i < 400; ++i) {
      const double u = 8.0 * i / 400.0;
      const RhoValue v = rho_of_squared(r, u);
      CHECK(std::abs((rho_of_squared(r, u + h).rho - rho_of_squared(r, u - h).rho) / (2 * h) - v.psi) < 1e-6);
      CHECK(std::abs((rho_of_squared(r, u + h).psi - rho_of_squared(r, u - h).psi) / (2 * h) - v.psi_prime) < 1e-6);
    }
    CHECK(rho_of_squared(r, truncation_squared(r)).psi == doctest::Approx(0.0));
    CHECK(rho_of_squared(r, truncation_squared(r) * 1.01).psi == 0.0);
  }
}

TEST_CASE("rho invariants") {
  const RhoSpec r = RhoSpec::tukey(2.0, ArgumentConvention::ScaledDistance);
  double prev_rho = 0.0;
  double prev_u = u_weight(r, 0.0);
  CHECK(prev_u == doctest::Approx(rho_eval(r, 0.0).psi_prime));
  for (int i = 1; i <= 2000; ++i) {
    const double t = 3.0 * i / 2000.0;
    const RhoValue v = rho_eval(r, t);
    CHECK(v.rho >= prev_rho);
    CHECK(v.rho <= 1.0);
    if (t < r.c) CHECK(v.psi > 0.0);
    if (t >= r.c) CHECK(v.psi == 0.0);
    const double u = u_weight(r, t);
    CHECK(u <= prev_u);
    prev_rho = v.rho;
    prev_u = u;
  }
  for (double level : {0.0, 0.1, 0.5, 0.9, 1.0})
    CHECK(rho_eval(r, rho_inverse(r, level)).rho == doctest::Approx(level).epsilon(1e-12));
}

TEST_CASE("mahalanobis examples and affine invariance") {
  Vector x(2), m(2);
  x << 1, 1;
  m << 0, 0;
  Matrix s(2, 2);
  s << 1, 0.9, 0.9, 1;
  CHECK(mahalanobis_sq(x, m, s) == doctest::Approx(2.0 / 1.9).epsilon(1e-14));
  CHECK(mahalanobis_sq(m, m, s) == 0.0);
  CHECK(mahalanobis_sq(Vector::Unit(3, 0), Vector::Zero(3), Matrix::Identity(3, 3)) == doctest::Approx(1.0));

  std::mt19937_64 eng(11);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + rep % 5;
    const Matrix sigma = random_spd(d, eng);
    Matrix A(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) A(i, j) = normal(eng);
    A += 2.0 * Matrix::Identity(d, d);
    Vector b(d), xx(d), mm(d);
    for (int i = 0; i < d; ++i) b[i] = normal(eng), xx[i] = normal(eng), mm[i] = normal(eng);
    const double before = mahalanobis_sq(xx, mm, sigma);
    const double after = mahalanobis_sq(A * xx + b, A * mm + b, A * sigma * A.transpose());
    CHECK(std::abs(before - after) < 1e-8 * std::max(1.0, before));
  }
}

TEST_CASE("non-SPD scatter is rejected") {
  Matrix s(2, 2);
  s << 1, 2, 2, 1;
  CHECK_THROWS_AS(mahalanobis_sq(Vector::Zero(2), Vector::Zero(2), s), SingularScatter);
  CHECK_THROWS_AS(MahalanobisMetric(Matrix::Zero(3, 3)), SingularScatter);
}

TEST_CASE("radial expectation trivial moments") {
  for (int d : {1, 2, 5, 15, 20}) {
    CHECK(radial_expectation([](double) { return 1.0; }, d) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(radial_expectation([](double u) { return u; }, d) == doctest::Approx(d).epsilon(1e-10));
  }
  CHECK_THROWS_AS(radial_expectation([](double) { return std::nan(""); }, 2), NumericalError);
}

TEST_CASE("radial expectation matches Monte Carlo") {
  const int n = 1000000;
  for (int d : {1, 2, 5}) {
    for (auto conv : {ArgumentConvention::SquaredDistance, ArgumentConvention::ScaledDistance}) {
      const RhoSpec r = RhoSpec::tukey(std::sqrt(6.0), conv);
      RadialQuadratureOptions opts;
      opts.breakpoints = {truncation_squared(r)};
      auto f_rho = [&](double u) { return rho_of_squared(r, u).rho; };
      auto f_psi = [&](double u) { return rho_of_squared(r, u).psi; };
      auto f_u = [&](double u) { return u_weight(r, std::sqrt(u)) * (u < truncation_squared(r) ? 1.0 : 0.0); };
      int k = 0;
      for (const std::function<double(double)>& f : {std::function<double(double)>(f_rho), std::function<double(double)>(f_psi), std::function<double(double)>(f_u)}) {
        const double q = radial_expectation(f, d, opts);
        const McMean mc = mc_chi2(f, d, n, 100 + 10 * d + k++);
        CHECK(std::abs(q - mc.mean) < 3.0 * mc.se + 1e-12);
      }
    }
  }
}

TEST_CASE("calibrate_c golden values") {
  const auto scaled = ArgumentConvention::ScaledDistance;
  CHECK(calibrate_c(1, 0.5, scaled) == doctest::Approx(1.547644980928).epsilon(1e-8));
  CHECK(calibrate_c(1, 0.25, scaled) == doctest::Approx(2.937014555142).epsilon(1e-8));
  CHECK(calibrate_c(2, 0.5, scaled) == doctest::Approx(2.660803392947).epsilon(1e-8));
  CHECK(calibrate_c(2, 0.25, scaled) == doctest::Approx(4.427443162048).epsilon(1e-8));
  CHECK(calibrate_c(5, 0.5, scaled) == doctest::Approx(4.652023341221).epsilon(1e-8));
  CHECK(calibrate_c(5, 0.25, scaled) == doctest::Approx(7.242268241801).epsilon(1e-8));
  CHECK(calibrate_c(15, 0.5, scaled) == doctest::Approx(8.376256278304).epsilon(1e-8));
  CHECK(calibrate_c(15, 0.25, scaled) == doctest::Approx(12.721298256869).epsilon(1e-8));
  const auto sq = ArgumentConvention::SquaredDistance;
  CHECK(calibrate_c(1, 0.5, sq) == doctest::Approx(1.085318046671).epsilon(1e-8));
  CHECK(calibrate_c(2, 0.5, sq) == doctest::Approx(3.268782379322).epsilon(1e-8));
}

TEST_CASE("calibrate_c solves its defining equation") {
  for (int d : {1, 2, 5, 15}) {
    for (double bp : {0.1, 0.25, 0.5}) {
      for (auto conv : {ArgumentConvention::SquaredDistance, ArgumentConvention::ScaledDistance}) {
        const double c = calibrate_c(d, bp, conv);
        CHECK(std::abs(expected_rho(RhoSpec::tukey(c, conv), d) - bp) < 1e-8);
      }
    }
    CHECK(calibrate_c(d, 0.25, ArgumentConvention::ScaledDistance) >
          calibrate_c(d, 0.5, ArgumentConvention::ScaledDistance));
  }
  CHECK_THROWS_AS(calibrate_c(2, 0.0, ArgumentConvention::ScaledDistance), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_c(2, 0.6, ArgumentConvention::ScaledDistance), std::invalid_argument);
}

TEST_CASE("calibrated constants pass the Monte Carlo oracle") {
  for (int d : {1, 15}) {
    const RhoSpec r = RhoSpec::tukey(calibrate_c(d, 0.5, ArgumentConvention::ScaledDistance),
                                     ArgumentConvention::ScaledDistance);
    const McMean mc = mc_chi2([&](double u) { return rho_eval(r, std::sqrt(u)).rho; }, d, 1000000, 77 + d);
    CHECK(std::abs(mc.mean - 0.5) < 3.0 * mc.se);
  }
  const RhoSpec r1 = RhoSpec::tukey(calibrate_c(1, 0.5, ArgumentConvention::ScaledDistance),
                                    ArgumentConvention::ScaledDistance);
  CHECK(radial_expectation([&](double u) { return rho_eval(r1, std::sqrt(u)).rho; }, 1,
                           {256, {r1.c * r1.c}}) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("elliptical sampler moments") {
  const EllipticalModel model = EllipticalModel::equicorrelated(3, 0.6);
  const EllipticalSampler sampler(model);
  const Matrix Y = sampler.draw_rows(200000, 5);
  const Vector mean = Y.colwise().mean().transpose();
  const Matrix centered = Y.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (Y.rows() - 1.0);
  CHECK(mean.cwiseAbs().maxCoeff() < 0.01);
  CHECK((cov - model.sigma0).cwiseAbs().maxCoeff() < 0.015);
  // Standardized residuals are spherical.
  const MahalanobisMetric metric(model.sigma0);
  const Vector d2 = metric.squared_rows(Y, model.mu0);
  CHECK(d2.mean() == doctest::Approx(3.0).epsilon(0.01));
  CHECK(sampler.draw_rows(10, 5) == Y.topRows(10));
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  const auto& rule = gauss_legendre(12);
  double s = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], 22);
  CHECK(s == doctest::Approx(2.0 / 23.0).epsilon(1e-13));
}
