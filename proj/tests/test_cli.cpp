#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opl/cli.hpp"

using namespace opl;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("opl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("simulate writes the data and a sidecar") {
  const fs::path dir = scratch("simulate");
  const auto csv = (dir / "data.csv").string();
  const auto r = run({"simulate", "--model", "ficm", "--eps", "0.15", "--d", "15", "--n", "100", "--shift", "10",
                      "--seed", "7", "--out", csv});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(csv));
  REQUIRE(rows.size() == 101);
  CHECK(std::count(rows[0].begin(), rows[0].end(), ',') == 29);
  CHECK(rows[0].rfind("x1,", 0) == 0);
  CHECK(fs::exists(dir / "data.json"));
  const auto side = Json::parse(slurp(dir / "data.json"));
  CHECK(side["seed"] == 7);

  SUBCASE("estimate reads it back") {
    const auto e = run({"estimate", "--in", csv, "--estimator", "coord-median", "--out", (dir / "est").string()});
    CHECK(e.code == 0);
    CHECK(fs::exists(dir / "est" / "estimate" / "estimate.json"));
  }
  SUBCASE("same seed, same bytes") {
    const auto again = (dir / "again.csv").string();
    run({"simulate", "--model", "ficm", "--eps", "0.15", "--d", "15", "--n", "100", "--shift", "10", "--seed", "7",
         "--out", again});
    CHECK(slurp(again) == slurp(csv));
  }
}

TEST_CASE("seed falls back to the environment") {
  const fs::path dir = scratch("env");
  ::setenv("OPL_SEED", "4242", 1);
  const auto r = run({"simulate", "--d", "2", "--n", "5", "--out", (dir / "d.csv").string()});
  ::unsetenv("OPL_SEED");
  REQUIRE(r.code == 0);
  CHECK(Json::parse(slurp(dir / "d.json"))["seed"] == 4242);
}

TEST_CASE("table1 prints one line per assertion") {
  const fs::path dir = scratch("table1");
  const auto r = run({"table1", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  const auto rows = lines(slurp(dir / "table1" / "results.csv"));
  CHECK(rows.size() == 10);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"simulate", "--eps", "1.5", "--out", (dir / "x.csv").string()}).code == 1);
  CHECK(run({"simulate", "--model", "nope", "--out", (dir / "x.csv").string()}).code == 1);
  CHECK(run({"estimate", "--out", dir.string()}).code == 1);
  CHECK(run({"influence", "--grid", "1:2", "--out", dir.string()}).code == 1);
  CHECK(run({"--help"}).code == 0);

  // Every value of the column tied: the scale cannot be positive.
  const fs::path tied = dir / "tied.csv";
  {
    std::ofstream f(tied);
    f << "x1,x2\n";
    for (int i = 0; i < 10; ++i) f << "1," << i << "\n";
  }
  const auto r = run({"estimate", "--in", tied.string(), "--estimator", "coord-s", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(!r.err.empty());
}

TEST_CASE("influence accepts negative grids") {
  const fs::path dir = scratch("influence");
  const auto r = run({"influence", "--kind", "ficm", "--d", "2", "--r", "0.9", "--grid", "-2:2:1", "--draws", "4000",
                      "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(dir / "influence" / "results.csv"));
  CHECK(rows.size() == 26);
}

TEST_CASE("replay and thread count reproduce results byte for byte") {
  const fs::path dir = scratch("replay");
  const std::vector<std::string> base{"fig4", "--d", "3", "--n", "30", "--t-grid", "0:40:20", "--estimators",
                                      "mean,coord-median,mcd", "--reps", "2", "--mcd-starts", "10", "--seed", "5"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  REQUIRE(run(with({"--threads", "1", "--out", (dir / "one").string()})).code == 0);
  REQUIRE(run(with({"--threads", "8", "--out", (dir / "eight").string()})).code == 0);
  const auto a = slurp(dir / "one" / "fig4" / "results.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "eight" / "fig4" / "results.csv"));

  const auto r = run({"replay", "--config", (dir / "one" / "fig4" / "config.json").string(), "--out",
                      (dir / "again").string()});
  REQUIRE(r.code == 0);
  CHECK(a == slurp(dir / "again" / "fig4" / "results.csv"));
}
