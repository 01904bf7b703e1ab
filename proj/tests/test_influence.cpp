#include <doctest.h>

#include <cmath>
#include <functional>

#include "opl/contamination.hpp"
#include "opl/errors.hpp"
#include "opl/influence.hpp"
#include "opl/radial.hpp"

using namespace opl;

namespace {

const double kRootSix = std::sqrt(6.0);

RhoSpec squared(double c) { return RhoSpec::tukey(c, ArgumentConvention::SquaredDistance); }
RhoSpec scaled(double c) { return RhoSpec::tukey(c, ArgumentConvention::ScaledDistance); }

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

// E[psi(z^2 + V)] with V ~ chi-square(m), by quadrature on the radius of V.
double expected_psi_shifted(const RhoSpec& rho, double z, int m) {
  auto psi = [&](double u) { return rho_of_squared(rho, u).psi; };
  if (m == 1) {
    return simpson([&](double w) { return psi(z * z + w * w) * std::exp(-w * w / 2) / std::sqrt(2 * M_PI); },
                   -12, 12, 24000);
  }
  // Radius density of chi(m), m >= 2.
  const double log_norm = (1 - m / 2.0) * std::log(2.0) - std::lgamma(m / 2.0);
  return simpson(
      [&](double r) {
        if (r == 0) return 0.0;
        return psi(z * z + r * r) * std::exp(log_norm + (m - 1) * std::log(r) - r * r / 2);
      },
      0, 14, 28000);
}

double a_psi_mc(const RhoSpec& rho, int d, int n) {
  std::mt19937_64 g(99);
  std::normal_distribution<double> z;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    double u = 0;
    for (int k = 0; k < d; ++k) {
      const double x = z(g);
      u += x * x;
    }
    const auto v = rho_of_squared(rho, u);
    s += 2.0 / d * v.psi_prime * u + v.psi;
  }
  return s / n;
}

}  // namespace

TEST_CASE("a_psi golden values") {
  CHECK(a_psi(squared(kRootSix), 1) == doctest::Approx(0.226714373138602).epsilon(1e-10));
  CHECK(a_psi(squared(kRootSix), 2) == doctest::Approx(0.147044684852738).epsilon(1e-10));
  CHECK(a_psi(squared(kRootSix), 3) == doctest::Approx(0.0852319279802059).epsilon(1e-10));
  CHECK(a_psi(squared(kRootSix), 5) == doctest::Approx(0.0226159838895935).epsilon(1e-9));
  CHECK(a_psi(scaled(kRootSix), 1) == doctest::Approx(0.193189898660211).epsilon(1e-10));
  CHECK(a_psi(scaled(kRootSix), 2) == doctest::Approx(0.133475287754757).epsilon(1e-10));
}

TEST_CASE("a_psi against Monte Carlo and monotone in c") {
  const int n = 1000000;
  for (int d : {1, 2, 4}) {
    for (const auto& rho : {squared(4.0), scaled(2.5)}) {
      const double mc = a_psi_mc(rho, d, n);
      CHECK(std::abs(a_psi(rho, d) - mc) < 4 * 0.5 / std::sqrt(double(n)) + 1e-4);
    }
  }
  // Once truncation is rare psi scales like 1/c^2.
  double prev = 0;
  for (double c = 5.0; c <= 20; c += 1.0) {
    const double a = a_psi(scaled(c), 3);
    if (c > 5.0) CHECK(a < prev);
    prev = a;
  }
}

TEST_CASE("g function") {
  const Vector m = Vector::Zero(2);
  const Matrix I = Matrix::Identity(2, 2);
  const auto rho = squared(6.0);
  SUBCASE("point mass beyond truncation vanishes") {
    const auto g = g_point_mass(vec({3, 3}), m, I, rho);
    CHECK(g.value.norm() == 0.0);
  }
  SUBCASE("point mass inside") {
    const Vector z = vec({1, 0.5});
    const auto g = g_point_mass(z, m, I, rho);
    CHECK((g.value - rho_of_squared(rho, 1.25).psi * z).norm() < 1e-14);
    MonteCarloOptions mc;
    mc.n_draws = 1000;
    const auto sampled = g_function([&](Engine&) { return z; }, m, I, rho, mc);
    CHECK((sampled.value - g.value).norm() < 1e-12);
  }
  SUBCASE("symmetric sampler gives zero mean") {
    MonteCarloOptions mc;
    mc.n_draws = 100000;
    const EllipticalSampler s(EllipticalModel::standard(2));
    const auto g = g_function([&](Engine& e) { return s.draw(e); }, m, I, rho, mc);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(g.value[k]) < 4 * g.se[k]);
  }
}

TEST_CASE("FDCM influence") {
  const auto rho = squared(kRootSix);
  InfluenceContext ctx(EllipticalModel::standard(2), rho, InfluenceKind::FDCM);
  CHECK(if_fdcm(Vector::Zero(2), ctx).value.norm() == 0.0);
  CHECK(if_fdcm(vec({5, 0}), ctx).value.norm() == 0.0);
  const Vector z = vec({0.7, -1.1});
  const auto r = if_fdcm(z, ctx);
  const double u = z.squaredNorm();
  CHECK((r.value - rho_of_squared(rho, u).psi * z / a_psi(rho, 2)).norm() < 1e-14);
  CHECK(r.value.normalized().dot(z.normalized()) == doctest::Approx(1.0));

  SUBCASE("non-spherical model") {
    const auto model = EllipticalModel::equicorrelated(2, 0.6);
    InfluenceContext c2(model, rho, InfluenceKind::FDCM);
    const double q = mahalanobis_sq(z, model.mu0, model.sigma0);
    CHECK((if_fdcm(z, c2).value - rho_of_squared(rho, q).psi * z / a_psi(rho, 2)).norm() < 1e-14);
  }
}

TEST_CASE("FICM influence at d = 1 equals FDCM") {
  InfluenceContext f(EllipticalModel::standard(1), squared(kRootSix), InfluenceKind::FICM);
  InfluenceContext g(EllipticalModel::standard(1), squared(kRootSix), InfluenceKind::FDCM);
  for (double t : {-3.0, -1.0, 0.2, 1.5, 2.4}) {
    const Vector z = vec({t});
    CHECK(if_ficm(z, f).value[0] == doctest::Approx(if_fdcm(z, g).value[0]).epsilon(1e-12));
  }
}

TEST_CASE("FICM influence against the decoupled quadrature") {
  MonteCarloOptions mc;
  mc.n_draws = 200000;
  for (int d : {2, 3}) {
    const auto rho = scaled(calibrate_c(d, 0.5, ArgumentConvention::ScaledDistance));
    InfluenceContext ctx(EllipticalModel::standard(d), rho, InfluenceKind::FICM, mc);
    const double A = a_psi(rho, d);
    for (const Vector& z : {Vector(Vector::LinSpaced(d, 0.5, 2.0)), Vector(Vector::Constant(d, -1.3)),
                            Vector(Vector::LinSpaced(d, 4.0, 0.1))}) {
      const auto r = if_ficm(z, ctx);
      for (int k = 0; k < d; ++k) {
        const double oracle = z[k] * expected_psi_shifted(rho, z[k], d - 1) / A;
        CHECK(std::abs(r.value[k] - oracle) < 4 * r.se[k] + 1e-6);
      }
    }
    // At the centre every contribution is symmetric.
    const auto zero = if_ficm(Vector::Zero(d), ctx);
    for (int k = 0; k < d; ++k) CHECK(std::abs(zero.value[k]) < 4 * zero.se[k] + 1e-12);
  }
}

TEST_CASE("FICM persistence along an axis") {
  InfluenceContext ctx(EllipticalModel::standard(2), squared(kRootSix), InfluenceKind::FICM);
  InfluenceContext fd(EllipticalModel::standard(2), squared(kRootSix), InfluenceKind::FDCM);
  // Far in x1 the first component dies out but the second row still carries
  // a clean x1 with a contaminated x2 near zero.
  const Vector a = if_ficm(vec({100, 1}), ctx).value;
  const Vector b = if_ficm(vec({1000, 1}), ctx).value;
  CHECK(a.norm() > 0.01);
  CHECK((a - b).norm() < 1e-12);
  CHECK(if_fdcm(vec({100, 1}), fd).value.norm() == 0.0);
}

TEST_CASE("PSICM averages FDCM and FICM; PCICM aliases FICM") {
  const auto model = EllipticalModel::equicorrelated(2, 0.5);
  const auto rho = squared(kRootSix);
  MonteCarloOptions mc;
  mc.n_draws = 50000;
  InfluenceContext fi(model, rho, InfluenceKind::FICM, mc);
  InfluenceContext fd(model, rho, InfluenceKind::FDCM, mc);
  InfluenceContext ps(model, rho, InfluenceKind::PSICM, mc);
  InfluenceContext pc(model, rho, InfluenceKind::PCICM, mc);
  for (double t = -3; t <= 3; t += 0.75) {
    const Vector z = vec({t, 0.4 * t - 0.2});
    const Vector avg = 0.5 * (if_ficm(z, fi).value + if_fdcm(z, fd).value);
    CHECK((influence(z, ps).value - avg).norm() < 1e-12);
    CHECK((influence(z, pc).value - if_ficm(z, fi).value).norm() < 1e-12);
  }
  CHECK(parse_influence_kind("pcicm-ii") == InfluenceKind::PCICM);
  CHECK_THROWS(parse_influence_kind("nope"));
}

TEST_CASE("coordinate swap symmetry") {
  MonteCarloOptions mc;
  mc.n_draws = 100000;
  InfluenceContext ctx(EllipticalModel::standard(2), squared(kRootSix), InfluenceKind::FICM, mc);
  for (const auto& p : {std::pair{0.5, 1.8}, std::pair{-2.0, 0.3}, std::pair{1.0, 4.0}}) {
    const auto a = if_ficm(vec({p.first, p.second}), ctx);
    const auto b = if_ficm(vec({p.second, p.first}), ctx);
    CHECK(std::abs(a.value[0] - b.value[1]) < 4 * std::hypot(a.se[0], b.se[1]) + 1e-9);
    CHECK(std::abs(a.value[1] - b.value[0]) < 4 * std::hypot(a.se[1], b.se[0]) + 1e-9);
  }
}

TEST_CASE("coordinatewise functional is the same under FDCM and FICM") {
  const auto rho = scaled(calibrate_c(1, 0.5, ArgumentConvention::ScaledDistance));
  MonteCarloOptions mc;
  mc.n_draws = 50000;
  const auto model = EllipticalModel::equicorrelated(3, 0.5);
  InfluenceContext fd(model, rho, InfluenceKind::FDCM, mc, LocationFunctional::Coordinatewise);
  InfluenceContext fi(model, rho, InfluenceKind::FICM, mc, LocationFunctional::Coordinatewise);
  for (const Vector& z : {vec({0.3, 1.0, -2.0}), vec({5, 0, 1}), vec({-1, -1, -1})}) {
    const auto a = if_fdcm(z, fd);
    const auto b = if_ficm(z, fi);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(a.value[k] - b.value[k]) < 4 * b.se[k] + 1e-9);
  }
}

TEST_CASE("FDCM GES closed form") {
  const double c = 2.9;
  const auto rho = scaled(c);
  InfluenceContext ctx(EllipticalModel::standard(3), rho, InfluenceKind::FDCM);
  const auto g = ges(ctx);
  const double expected = (3 / (c * c)) * (c / std::sqrt(5.0)) * (16.0 / 25.0) / a_psi(rho, 3);
  CHECK(g.value == doctest::Approx(expected).epsilon(1e-8));
  CHECK(g.argmax_z.norm() == doctest::Approx(c / std::sqrt(5.0)).epsilon(1e-5));
  CHECK(g.argmax_z.norm() > 0);
  CHECK(g.argmax_z.norm() < c);
  CHECK(g.se == 0.0);
  GesSearch inf;
  inf.norm = GesNorm::LInf;
  CHECK(ges(ctx, inf).value == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("FICM GES dominates FDCM for the multivariate functional") {
  const int d = 5;
  const auto rho = scaled(calibrate_c(d, 0.5, ArgumentConvention::ScaledDistance));
  MonteCarloOptions mc;
  mc.n_draws = 50000;
  GesSearch s;
  s.search_draws = 5000;
  s.n_random_directions = 8;
  const auto fd = ges(InfluenceContext(EllipticalModel::standard(d), rho, InfluenceKind::FDCM, mc), s);
  const auto fi = ges(InfluenceContext(EllipticalModel::standard(d), rho, InfluenceKind::FICM, mc), s);
  CHECK(fi.value - 3 * fi.se > fd.value);
  CHECK(fi.se > 0);
}

TEST_CASE("vector norms") {
  CHECK(vector_norm(vec({3, -4}), GesNorm::L2) == 5.0);
  CHECK(vector_norm(vec({3, -4}), GesNorm::LInf) == 4.0);
  CHECK(parse_ges_norm("linf") == GesNorm::LInf);
}

TEST_CASE("finite-epsilon slope oracle") {
  const auto rho = squared(kRootSix);
  NumericOptions o;
  o.n_sample = 20000;
  o.n_boot = 5;
  const Vector z = vec({1.2, -0.4});
  SUBCASE("M with fixed scatter under FDCM") {
    InfluenceContext ctx(EllipticalModel::standard(2), rho, InfluenceKind::FDCM);
    const auto num = if_numeric(z, ctx, NumericEstimator::MFixedScatter, o);
    const auto ana = if_fdcm(z, ctx);
    CHECK((num.value - ana.value).norm() < 0.05 * ana.value.norm());
  }
  SUBCASE("M with fixed scatter under FICM") {
    o.model = ContaminationModel::FICM;
    InfluenceContext ctx(EllipticalModel::standard(2), rho, InfluenceKind::FICM);
    const auto num = if_numeric(z, ctx, NumericEstimator::MFixedScatter, o);
    const auto ana = if_ficm(z, ctx);
    CHECK((num.value - ana.value).norm() < 0.05 * ana.value.norm());
  }
  SUBCASE("bad eps grid") {
    InfluenceContext ctx(EllipticalModel::standard(2), rho, InfluenceKind::FDCM);
    o.eps_grid = {0.05};
    CHECK_THROWS_AS(if_numeric(z, ctx, NumericEstimator::MFixedScatter, o), std::invalid_argument);
  }
}
