#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opl/experiments.hpp"

using namespace opl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("opl_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double round2(double x) { return std::round(x * 100) / 100; }

}  // namespace

TEST_CASE("epsilon0 values and shape") {
  CHECK(round2(epsilon0(0, 1)) == 0.50);
  CHECK(epsilon0(0, 2) == doctest::Approx(0.2929).epsilon(1e-4));
  CHECK(round2(epsilon0(0, 100)) == 0.01);
  const double expected[] = {0.50, 0.29, 0.21, 0.16, 0.13, 0.07, 0.05, 0.03, 0.01};
  const auto dims = table1_dims();
  REQUIRE(dims.size() == 9);
  for (std::size_t i = 0; i < dims.size(); ++i) CHECK(round2(epsilon0(0, dims[i])) == expected[i]);
  for (double delta : {0.0, 0.1, 0.3}) CHECK(epsilon0(delta, 1) == doctest::Approx(0.5 + delta).epsilon(1e-15));
  for (int d = 1; d < 50; ++d) CHECK(epsilon0(0.1, d + 1) < epsilon0(0.1, d));
  for (double delta = 0; delta < 0.45; delta += 0.05) CHECK(epsilon0(delta + 0.05, 7) > epsilon0(delta, 7));
  CHECK_THROWS(epsilon0(0.5, 2));
  CHECK_THROWS(epsilon0(0.1, 0));
}

TEST_CASE("transform and clean-case thresholds") {
  const Matrix A2 = theorem1_transform(2);
  CHECK(A2 == (Matrix(2, 2) << 2, 1, 1, 2).finished());
  CHECK(theorem1_transform(3).determinant() == doctest::Approx(4.0));
  for (int d = 1; d <= 10; ++d) CHECK(theorem1_transform(d).determinant() == doctest::Approx(d + 1.0));
  CHECK(clean_case_threshold(0.05) == 14);
  CHECK(clean_case_threshold(0.01) == 69);
  const auto rep = table1_report();
  CHECK(rep.all_passed());
  CHECK(rep.table("results.csv").find("d,") == 0);
}

TEST_CASE("grid parsing") {
  const auto g = parse_grid("-1:1:0.5");
  REQUIRE(g.size() == 5);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == 1.0);
  CHECK(parse_grid("0:100:5").size() == 21);
  CHECK(arithmetic_grid(0.02, 0.5, 0.02).size() == 25);
  CHECK(arithmetic_grid(0.02, 0.5, 0.02)[2] == 0.06);
  CHECK_THROWS(parse_grid("1:2"));
  CHECK_THROWS(parse_grid("0:1:0"));
  CHECK_THROWS(parse_grid("a:b:c"));
}

TEST_CASE("propagation demo") {
  PropagationOptions o;
  o.n = 20000;
  const auto rep = propagation_demo(o);
  for (const auto& a : rep.assertions) CHECK_MESSAGE(a.pass, a.name << ": " << a.detail);
  SUBCASE("eps = 0 leaves both columns clean") {
    PropagationOptions clean = o;
    clean.eps = 0.0;
    clean.n = 2000;
    const auto r = propagation_demo(clean);
    CHECK(r.metrics["fraction_contaminated_cells"][0].get<double>() == 1.0);
    CHECK(std::abs(r.metrics["median_l1"].get<double>()) < 0.2);
  }
  SUBCASE("json round trip") {
    const auto back = propagation_from_json(to_json(o));
    CHECK(back.n == o.n);
    CHECK(back.transform == o.transform);
    CHECK(back.seed == o.seed);
  }
}

TEST_CASE("bias sweep is deterministic across threads") {
  BiasSweepOptions o;
  o.d = 3;
  o.n = 40;
  o.t_grid = {0, 20, 60};
  o.estimators = {"mean", "coord-median", "mcd"};
  o.replications = 3;
  o.cfg.mcd_starts = 20;
  const auto one = bias_sweep(o);
  o.threads = 4;
  const auto four = bias_sweep(o);
  CHECK(one.table("results.csv") == four.table("results.csv"));
  CHECK(one.table("curve.csv") == four.table("curve.csv"));
  CHECK(one.table("results.csv").rfind("t,estimator,replication,max_bias", 0) == 0);

  const auto back = bias_sweep_from_json(to_json(o));
  CHECK(back.estimators == o.estimators);
  CHECK(back.t_grid == o.t_grid);
  CHECK_THROWS(location_by_name("nope", Matrix::Zero(5, 2), 1, {}));
}

TEST_CASE("report writing") {
  const fs::path dir = scratch("report");
  const auto rep = table1_report();
  rep.write(dir);
  CHECK(fs::exists(dir / "table1" / "config.json"));
  CHECK(fs::exists(dir / "table1" / "summary.json"));
  CHECK(slurp(dir / "table1" / "results.csv") == rep.table("results.csv"));
  const auto summary = Json::parse(slurp(dir / "table1" / "summary.json"));
  CHECK(summary["name"] == "table1");
  fs::remove_all(dir);
}

TEST_CASE("univariate S breaks down near one half") {
  BreakdownOptions o;
  o.estimator = "s";
  o.d = 1;
  o.replications = 4;
  o.eps_grid = arithmetic_grid(0.3, 0.6, 0.04);
  BreakdownResult res;
  const auto rep = empirical_breakdown(o, &res);
  CHECK(res.bound == doctest::Approx(0.5));
  REQUIRE(!std::isnan(res.eps_star_hat));
  CHECK(std::abs(res.eps_star_hat - 0.5) <= 0.04 + 1e-12);
  const auto back = breakdown_from_json(to_json(o));
  CHECK(back.eps_grid == o.eps_grid);
  CHECK(back.estimator == "s");
}

TEST_CASE("GES-vs-dimension options round trip") {
  GesVsDimOptions o;
  o.d_grid = {1, 4};
  o.mc.n_draws = 1234;
  const auto back = ges_vs_dim_from_json(to_json(o));
  CHECK(back.d_grid == o.d_grid);
  CHECK(back.mc.n_draws == 1234);
  CHECK(back.convention == o.convention);
}
