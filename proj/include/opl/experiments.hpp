#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opl/contamination.hpp"
#include "opl/influence.hpp"
#include "opl/io.hpp"
#include "opl/types.hpp"

namespace opl {

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::string name;
  Json config;
  std::vector<std::pair<std::string, std::string>> tables;  // file name, CSV text
  std::vector<std::pair<std::string, std::string>> figures; // file name, SVG text
  Json metrics = Json::object();
  std::vector<Assertion> assertions;

  const std::string& table(const std::string& file) const;
  bool all_passed() const;
  Json summary() const;
  // <out>/<name>/config.json, every table, figure and summary.json.
  void write(const std::filesystem::path& out_dir) const;
};

// ---------------------------------------------------------------------------
// Breakdown bound and clean-case thresholds

// 1 - (1/2 - delta)^{1/d}
double epsilon0(double delta, int d);
// Identity plus the all-ones matrix.
Matrix theorem1_transform(int d);
// Smallest d with (1 - eps)^d < 1/2.
int clean_case_threshold(double eps);

std::vector<int> table1_dims();
ExperimentReport table1_report();

// ---------------------------------------------------------------------------

struct PropagationOptions {
  int n = 20;
  double eps = 0.3;
  double shift_mean = 10.0;
  double shift_var = 1.0;
  Matrix transform = (Matrix(2, 2) << 0.64, 0.77, 0.78, 0.62).finished();
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int bins = 30;
};

Json to_json(const PropagationOptions& o);
PropagationOptions propagation_from_json(const Json& j);
ExperimentReport propagation_demo(const PropagationOptions& opts);

// ---------------------------------------------------------------------------

struct SweepEstimators {
  int mcd_starts = 500;
  int mve_trials = 3000;
  int s_starts = 20;
};

// Location estimate by name: mean, coord-median, coord-s, mcd, mve, s.
Vector location_by_name(const std::string& name, const Matrix& X, std::uint64_t seed,
                        const SweepEstimators& cfg);
std::vector<std::string> known_location_estimators();

struct BiasSweepOptions {
  int d = 15;
  int n = 100;
  double eps = 0.15;
  ContaminationModel model = ContaminationModel::FICM;
  std::vector<double> t_grid;  // default 0, 5, ..., 100
  std::vector<std::string> estimators{"mean", "coord-median", "mcd", "mve"};
  int replications = 20;
  SweepEstimators cfg;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

Json to_json(const BiasSweepOptions& o);
BiasSweepOptions bias_sweep_from_json(const Json& j);
// results.csv: t,estimator,replication,max_bias; curve.csv: t,estimator,mean_max_bias,mean_abs_bias,failures.
ExperimentReport bias_sweep(const BiasSweepOptions& opts);

// ---------------------------------------------------------------------------

struct GesVsDimOptions {
  std::vector<int> d_grid{1, 2, 3, 5, 10, 15, 20};
  double bp = 0.5;
  ArgumentConvention convention = ArgumentConvention::ScaledDistance;
  MonteCarloOptions mc;
  GesSearch search;
  double flat_tolerance = 0.05;  // relative spread allowed for a flat curve
};

Json to_json(const GesVsDimOptions& o);
GesVsDimOptions ges_vs_dim_from_json(const Json& j);
// results.csv: d,estimator,model_kind,ges,stderr
ExperimentReport ges_vs_dim(const GesVsDimOptions& opts);

// ---------------------------------------------------------------------------

struct BreakdownOptions {
  std::string estimator = "mcd";
  int d = 2;
  int n = 100;
  ContaminationModel model = ContaminationModel::FICM;
  std::vector<double> eps_grid;  // default 0.02, 0.04, ..., 0.5
  double t_large = 1000.0;
  double threshold = 10.0;
  int replications = 10;
  SweepEstimators cfg;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct BreakdownResult {
  double eps_star_hat = 0.0;  // NaN when no grid point breaks down
  double bound = 0.0;
  std::vector<double> mean_bias;  // per grid point
};

Json to_json(const BreakdownOptions& o);
BreakdownOptions breakdown_from_json(const Json& j);
// results.csv: eps,replication,max_bias; curve.csv: eps,mean_max_bias,failures.
ExperimentReport empirical_breakdown(const BreakdownOptions& opts, BreakdownResult* result = nullptr);

// ---------------------------------------------------------------------------

// start:stop:step, inclusive of stop up to rounding.
std::vector<double> parse_grid(const std::string& spec);
std::vector<double> arithmetic_grid(double start, double stop, double step);

}  // namespace opl
