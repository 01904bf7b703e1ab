#include <doctest.h>

#include <cmath>

#include "opl/contamination.hpp"
#include "opl/experiments.hpp"

using namespace opl;

namespace {

ContaminationSpec make(ContaminationModel m, double eps, double gamma = 0.5) {
  ContaminationSpec s;
  s.model = m;
  s.epsilon = eps;
  s.gamma = gamma;
  return s;
}

const ContaminationModel kAll[] = {ContaminationModel::FDCM, ContaminationModel::FICM, ContaminationModel::PSICM,
                                   ContaminationModel::PCICM_I, ContaminationModel::PCICM_II};

}  // namespace

TEST_CASE("indicator edge cases") {
  Engine eng(3);
  for (auto m : kAll) {
    const auto b = sample_indicators(make(m, 0.0), 5, eng);
    CHECK(b.cast<int>().sum() == 0);
  }
  CHECK(sample_indicators(make(ContaminationModel::FDCM, 1.0), 4, eng).cast<int>().sum() == 4);
  CHECK_THROWS_AS(sample_indicators(make(ContaminationModel::PCICM_I, 0.4, 0.3), 3, eng), std::invalid_argument);
}

TEST_CASE("marginal cell probability is eps for every model") {
  const int n = 100000;
  const int d = 5;
  const double eps = 0.1;
  for (auto m : kAll) {
    const auto spec = make(m, eps);
    Vector hits = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
      Engine eng = substream(9, Stream::Contamination, static_cast<std::uint64_t>(i));
      hits += sample_indicators(spec, d, eng).cast<double>();
    }
    const double tol = 4.0 * std::sqrt(eps * (1 - eps) / n);  // 25 checks
    for (int k = 0; k < d; ++k) CHECK(std::abs(hits[k] / n - eps) < tol);
  }
}

TEST_CASE("delta_k identities") {
  for (auto m : kAll) {
    for (int d : {1, 2, 3, 7, 15}) {
      for (double eps : {0.0, 0.01, 0.1, 0.3, 0.49}) {
        const auto spec = make(m, eps);
        double total = 0, mean = 0;
        for (int k = 0; k <= d; ++k) {
          total += delta_k(spec, d, k);
          mean += k * delta_k(spec, d, k);
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
        CHECK(std::abs(mean - d * eps) < 1e-12);
      }
    }
  }
  CHECK(delta_k(make(ContaminationModel::FDCM, 0.2), 7, 3) == 0.0);
  CHECK(delta_k(make(ContaminationModel::FICM, 0.3), 2, 1) == doctest::Approx(0.42).epsilon(1e-12));
  CHECK_THROWS(delta_k(make(ContaminationModel::FICM, 0.3), 2, 3));
}

TEST_CASE("delta_k matches empirical frequencies") {
  const int n = 100000;
  for (auto m : kAll) {
    const int d = 3;
    const auto spec = make(m, 0.2);
    std::vector<int> count(d + 1, 0);
    for (int i = 0; i < n; ++i) {
      Engine eng = substream(21, Stream::Contamination, static_cast<std::uint64_t>(i));
      ++count[static_cast<std::size_t>(sample_indicators(spec, d, eng).cast<int>().sum())];
    }
    for (int k = 0; k <= d; ++k) {
      const double p = delta_k(spec, d, k);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
      CHECK(std::abs(count[static_cast<std::size_t>(k)] / double(n) - p) < 4 * se + 1e-12);
    }
  }
}

TEST_CASE("clean-case probabilities") {
  const auto f05 = make(ContaminationModel::FICM, 0.05);
  CHECK(clean_case_prob(f05, 14) < 0.5);
  CHECK(clean_case_prob(f05, 14) == doctest::Approx(0.4877).epsilon(1e-3));
  CHECK(clean_case_prob(f05, 13) >= 0.5);
  CHECK(clean_case_prob(make(ContaminationModel::FICM, 0.01), 69) < 0.5);
  CHECK(clean_case_prob(make(ContaminationModel::FDCM, 0.3), 9) == doctest::Approx(0.7));
}

TEST_CASE("contaminate contracts") {
  const Matrix Y = EllipticalSampler(EllipticalModel::standard(4)).draw_rows(500, 4);
  SUBCASE("eps = 0 leaves Y untouched") {
    const auto out = contaminate(Y, make(ContaminationModel::FICM, 0.0), 1);
    CHECK(out.X == Y);
  }
  SUBCASE("clean cells agree exactly, point mass replaces whole rows") {
    auto spec = make(ContaminationModel::FDCM, 0.3);
    spec.outlier = OutlierGen::point_mass(Vector::Constant(4, 7.5));
    const auto out = contaminate(Y, spec, 2);
    int spoiled = 0;
    for (int i = 0; i < Y.rows(); ++i) {
      if (out.B.row(i).cast<int>().sum() == 4) {
        ++spoiled;
        CHECK(out.X.row(i) == Vector::Constant(4, 7.5).transpose());
      } else {
        CHECK(out.X.row(i) == Y.row(i));
      }
    }
    CHECK(spoiled > 100);
  }
  SUBCASE("additive shift") {
    auto spec = make(ContaminationModel::FICM, 0.2);
    spec.outlier = OutlierGen::additive_shift(3.0);
    const auto out = contaminate(Y, spec, 3);
    for (int i = 0; i < Y.rows(); ++i)
      for (int j = 0; j < 4; ++j) CHECK(out.X(i, j) == doctest::Approx(Y(i, j) + (out.B(i, j) ? 3.0 : 0.0)));
  }
  SUBCASE("thread count does not change the output") {
    auto spec = make(ContaminationModel::PSICM, 0.2);
    spec.outlier = OutlierGen::gaussian_shift(Vector::Constant(4, 10.0), 1.0);
    const auto a = contaminate(Y, spec, 5, 1);
    const auto b = contaminate(Y, spec, 5, 4);
    CHECK(a.X == b.X);
    CHECK(a.B == b.B);
  }
}

TEST_CASE("FICM cell-count law at d=2") {
  auto spec = make(ContaminationModel::FICM, 0.3);
  spec.outlier = OutlierGen::gaussian_shift(Vector::Constant(2, 10.0), 1.0);
  const auto out = simulate(EllipticalModel::standard(2), spec, 100000, 8);
  std::array<int, 3> groups{};
  for (int i = 0; i < out.B.rows(); ++i) ++groups[static_cast<std::size_t>(out.B.row(i).cast<int>().sum())];
  CHECK(std::abs(groups[0] / 1e5 - 0.49) < 0.01);
  CHECK(std::abs(groups[1] / 1e5 - 0.42) < 0.01);
  CHECK(std::abs(groups[2] / 1e5 - 0.09) < 0.01);
}

TEST_CASE("H(I, z) sampler") {
  const EllipticalSampler sampler(EllipticalModel::equicorrelated(3, 0.5));
  Vector z(3);
  z << 4, -2, 9;
  Engine eng(17);
  const std::vector<int> all{0, 1, 2};
  CHECK(sample_H_I_z(all, z, sampler, eng) == z);
  const std::vector<int> one{1};
  double s = 0, s2 = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vector x = sample_H_I_z(one, z, sampler, eng);
    CHECK(x[1] == -2.0);
    s += x[0];
    s2 += x[0] * x[0];
  }
  CHECK(std::abs(s / 1e4) < 0.05);
  CHECK(s2 / 1e4 == doctest::Approx(1.0).epsilon(0.05));
  const std::vector<int> none;
  Vector mean = Vector::Zero(3);
  for (int i = 0; i < 10000; ++i) mean += sample_H_I_z(none, z, sampler, eng);
  CHECK((mean / 1e4).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("FICM contamination spreads under the all-ones transform") {
  const int d = 3;
  const double eps = 0.1;
  auto spec = make(ContaminationModel::FICM, eps);
  spec.outlier = OutlierGen::additive_shift(5.0);
  const Matrix Y = EllipticalSampler(EllipticalModel::standard(d)).draw_rows(50000, 12);
  const auto out = contaminate(Y, spec, 12);
  const Matrix A = theorem1_transform(d);
  const Matrix AX = out.X * A.transpose();
  const Matrix AY = Y * A.transpose();
  int rows = 0;
  Vector cells = Vector::Zero(d);
  for (int i = 0; i < Y.rows(); ++i) {
    bool any = false;
    for (int j = 0; j < d; ++j) {
      if (AX(i, j) != AY(i, j)) {
        any = true;
        cells[j] += 1;
      }
    }
    rows += any;
  }
  const double expected = 1 - std::pow(1 - eps, d);
  CHECK(std::abs(rows / 50000.0 - expected) < 0.01);
  // Each transformed column is contaminated far more often than eps.
  for (int j = 0; j < d; ++j) CHECK(cells[j] / 50000.0 > eps + 0.1);
}
