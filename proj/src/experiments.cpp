#include "opl/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "opl/errors.hpp"
#include "opl/estimators.hpp"
#include "opl/parallel.hpp"
#include "opl/radial.hpp"
#include "opl/svg.hpp"

namespace opl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double round2(double x) { return std::round(x * 100.0) / 100.0; }

double mean_finite(const std::vector<double>& v, int* missing = nullptr) {
  double total = 0.0;
  int count = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      total += x;
      ++count;
    }
  }
  if (missing) *missing = static_cast<int>(v.size()) - count;
  return count ? total / count : kNaN;
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2) return upper;
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

std::string fmt(double x) { return format_number(x); }

Json grid_json(const std::vector<double>& v) {
  Json j = Json::array();
  for (double x : v) j.push_back(x);
  return j;
}

std::vector<double> grid_from(const Json& j) { return j.get<std::vector<double>>(); }

}  // namespace

// ---------------------------------------------------------------------------

const std::string& ExperimentReport::table(const std::string& file) const {
  for (const auto& [name, text] : tables)
    if (name == file) return text;
  throw std::out_of_range("report has no table " + file);
}

bool ExperimentReport::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

Json ExperimentReport::summary() const {
  Json out;
  out["name"] = name;
  out["passed"] = all_passed();
  Json list = Json::array();
  for (const auto& a : assertions) list.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  out["assertions"] = list;
  out["metrics"] = metrics;
  return out;
}

void ExperimentReport::write(const std::filesystem::path& out_dir) const {
  const auto dir = out_dir / name;
  std::filesystem::create_directories(dir);
  write_json_file(dir / "config.json", config);
  for (const auto& [file, text] : tables) write_text_file(dir / file, text);
  for (const auto& [file, text] : figures) write_text_file(dir / file, text);
  write_json_file(dir / "summary.json", summary());
}

// ---------------------------------------------------------------------------

double epsilon0(double delta, int d) {
  if (d < 1) throw std::invalid_argument("epsilon0: d must be >= 1");
  if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("epsilon0: delta must lie in [0, 1/2)");
  return 1.0 - std::pow(0.5 - delta, 1.0 / d);
}

Matrix theorem1_transform(int d) {
  if (d < 1) throw std::invalid_argument("theorem1_transform: d must be >= 1");
  return Matrix::Identity(d, d) + Matrix::Ones(d, d);
}

int clean_case_threshold(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("clean_case_threshold: eps must lie in (0, 1)");
  int d = 1;
  while (std::pow(1.0 - eps, d) >= 0.5) ++d;
  return d;
}

std::vector<int> table1_dims() { return {1, 2, 3, 4, 5, 10, 15, 20, 100}; }

ExperimentReport table1_report() {
  ExperimentReport rep;
  rep.name = "table1";
  rep.config = {{"command", "table1"}, {"delta", 0.0}, {"dims", table1_dims()}};
  const std::array<double, 9> published{0.50, 0.29, 0.21, 0.16, 0.13, 0.07, 0.05, 0.03, 0.01};
  CsvTable table({"d", "epsilon0", "rounded"});
  const auto dims = table1_dims();
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double e = epsilon0(0.0, dims[i]);
    table.add_row({std::to_string(dims[i]), fmt(e), fmt(round2(e))});
    rep.assertions.push_back({"epsilon0 d=" + std::to_string(dims[i]),
                              std::abs(round2(e) - published[i]) < 1e-12,
                              "rounded " + fmt(round2(e)) + " expected " + fmt(published[i])});
  }
  rep.tables.emplace_back("results.csv", table.text());

  const int t05 = clean_case_threshold(0.05);
  const int t01 = clean_case_threshold(0.01);
  rep.metrics["clean_case_threshold"] = {{"eps=0.05", t05}, {"eps=0.01", t01}};
  rep.assertions.push_back({"clean-case threshold eps=0.05", t05 == 14, "d=" + std::to_string(t05)});
  rep.assertions.push_back({"clean-case threshold eps=0.01", t01 == 69, "d=" + std::to_string(t01)});
  for (int d : {1, 2, 3}) {
    const double det = theorem1_transform(d).determinant();
    rep.assertions.push_back({"transform invertible d=" + std::to_string(d), std::abs(det - (d + 1)) < 1e-12,
                              "det " + fmt(det)});
  }
  return rep;
}

// ---------------------------------------------------------------------------

Json to_json(const PropagationOptions& o) {
  return {{"n", o.n},           {"eps", o.eps},   {"shift_mean", o.shift_mean}, {"shift_var", o.shift_var},
          {"transform", to_json(o.transform)}, {"seed", o.seed}, {"threads", o.threads}, {"bins", o.bins}};
}

PropagationOptions propagation_from_json(const Json& j) {
  PropagationOptions o;
  o.n = j.value("n", o.n);
  o.eps = j.value("eps", o.eps);
  o.shift_mean = j.value("shift_mean", o.shift_mean);
  o.shift_var = j.value("shift_var", o.shift_var);
  if (j.contains("transform")) o.transform = matrix_from_json(j["transform"]);
  o.seed = j.value("seed", o.seed);
  o.threads = j.value("threads", o.threads);
  o.bins = j.value("bins", o.bins);
  return o;
}

ExperimentReport propagation_demo(const PropagationOptions& opts) {
  if (opts.transform.rows() != 2 || opts.transform.cols() != 2)
    throw std::invalid_argument("propagation_demo: transform must be 2 x 2");
  if (opts.n < 1) throw std::invalid_argument("propagation_demo: n must be >= 1");
  ContaminationSpec spec;
  spec.model = ContaminationModel::FICM;
  spec.epsilon = opts.eps;
  spec.outlier = OutlierGen::gaussian_shift(Vector::Constant(2, opts.shift_mean), opts.shift_var);
  const ContaminatedData data = simulate(EllipticalModel::standard(2), spec, opts.n, opts.seed, opts.threads);
  const Matrix L = data.X * opts.transform.transpose();

  ExperimentReport rep;
  rep.name = "fig3";
  rep.config = to_json(opts);
  rep.config["command"] = "fig3";
  rep.config["contamination"] = to_json(spec);

  CsvTable table({"x1", "x2", "l1", "l2", "b1", "b2"});
  std::array<int, 3> groups{0, 0, 0};
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    table.add_row({fmt(data.X(i, 0)), fmt(data.X(i, 1)), fmt(L(i, 0)), fmt(L(i, 1)), data.B(i, 0) ? "1" : "0",
                   data.B(i, 1) ? "1" : "0"});
    ++groups[static_cast<std::size_t>(data.B(i, 0) + data.B(i, 1))];
  }
  rep.tables.emplace_back("results.csv", table.text());

  // Common bins for the four columns.
  const Matrix all = (Matrix(data.X.rows(), 4) << data.X, L).finished();
  const double lo = all.minCoeff();
  const double hi = all.maxCoeff() + 1e-12;
  const double width = (hi - lo) / opts.bins;
  CsvTable hist({"column", "bin_lo", "bin_hi", "count"});
  const std::array<std::string, 4> names{"x1", "x2", "l1", "l2"};
  std::vector<SvgSeries> series;
  for (int c = 0; c < 4; ++c) {
    std::vector<int> counts(static_cast<std::size_t>(opts.bins), 0);
    for (Eigen::Index i = 0; i < all.rows(); ++i) {
      const int b = std::min(opts.bins - 1, static_cast<int>((all(i, c) - lo) / width));
      ++counts[static_cast<std::size_t>(b)];
    }
    SvgSeries s{names[static_cast<std::size_t>(c)], {}, {}};
    for (int b = 0; b < opts.bins; ++b) {
      hist.add_row({names[static_cast<std::size_t>(c)], fmt(lo + b * width), fmt(lo + (b + 1) * width),
                    std::to_string(counts[static_cast<std::size_t>(b)])});
      s.x.push_back(lo + (b + 0.5) * width);
      s.y.push_back(counts[static_cast<std::size_t>(b)]);
    }
    series.push_back(std::move(s));
  }
  rep.tables.emplace_back("histogram.csv", hist.text());
  rep.figures.emplace_back("histogram.svg", svg_line_chart("Column histograms", "value", "count", series));

  std::array<double, 4> medians{};
  for (int c = 0; c < 4; ++c) {
    std::vector<double> col(all.col(c).data(), all.col(c).data() + all.rows());
    medians[static_cast<std::size_t>(c)] = median_of(std::move(col));
  }
  const double n = static_cast<double>(opts.n);
  std::array<double, 3> fractions{groups[0] / n, groups[1] / n, groups[2] / n};
  for (int c = 0; c < 4; ++c) rep.metrics["median_" + names[static_cast<std::size_t>(c)]] = medians[static_cast<std::size_t>(c)];
  rep.metrics["fraction_contaminated_cells"] = {fractions[0], fractions[1], fractions[2]};
  Json expected = Json::array();
  for (int k = 0; k <= 2; ++k) expected.push_back(delta_k(spec, 2, k));
  rep.metrics["expected_fraction"] = expected;

  for (int k = 0; k <= 2; ++k) {
    const double want = delta_k(spec, 2, k);
    rep.assertions.push_back({"rows with " + std::to_string(k) + " contaminated cells",
                              std::abs(fractions[static_cast<std::size_t>(k)] - want) <= 0.01,
                              fmt(fractions[static_cast<std::size_t>(k)]) + " vs " + fmt(want) + " +- 0.01"});
  }
  rep.assertions.push_back({"median l1 above 1.0", medians[2] > 1.0, "median l1 " + fmt(medians[2])});
  rep.assertions.push_back({"median x1 below 0.6", medians[0] < 0.6, "median x1 " + fmt(medians[0])});
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<std::string> known_location_estimators() { return {"mean", "coord-median", "coord-s", "mcd", "mve", "s"}; }

Vector location_by_name(const std::string& name, const Matrix& X, std::uint64_t seed, const SweepEstimators& cfg) {
  if (name == "mean") return sample_mean(X).mu;
  if (name == "coord-median") return coord_median(X);
  if (name == "coord-s") return coord_s(X, 0.5).mu;
  if (name == "mcd") {
    McdOptions o;
    o.n_starts = cfg.mcd_starts;
    o.seed = seed;
    return mcd(X, o).est.mu;
  }
  if (name == "mve") {
    MveOptions o;
    o.n_trials = cfg.mve_trials;
    o.seed = seed;
    return mve(X, o).est.mu;
  }
  if (name == "s") {
    SOptions o;
    o.n_starts = cfg.s_starts;
    o.seed = seed;
    return s_estimate(X, o).est.mu;
  }
  throw std::invalid_argument("unknown estimator: " + name);
}

namespace {

Json to_json(const SweepEstimators& c) {
  return {{"mcd_starts", c.mcd_starts}, {"mve_trials", c.mve_trials}, {"s_starts", c.s_starts},
          {"mcd_h", "floor((n+d+1)/2)"}, {"mve_coverage", "ceil((n+d+1)/2)"}};
}

SweepEstimators sweep_from_json(const Json& j) {
  SweepEstimators c;
  c.mcd_starts = j.value("mcd_starts", c.mcd_starts);
  c.mve_trials = j.value("mve_trials", c.mve_trials);
  c.s_starts = j.value("s_starts", c.s_starts);
  return c;
}

void check_estimators(const std::vector<std::string>& names) {
  const auto known = known_location_estimators();
  for (const auto& n : names)
    if (std::find(known.begin(), known.end(), n) == known.end())
      throw std::invalid_argument("unknown estimator: " + n);
}

struct CellOutcome {
  std::vector<double> max_bias;   // per estimator
  std::vector<double> mean_bias;  // average |T_j|
};

// Replication r draws its clean sample and indicators from the same substreams
// at every grid point, so curves differ only through the grid parameter.
CellOutcome run_cell(const std::vector<std::string>& estimators, int d, int n, const ContaminationSpec& spec,
                     std::uint64_t seed, int replication, const SweepEstimators& cfg) {
  const auto rep_seed = substream_seed(seed, Stream::Replication, static_cast<std::uint64_t>(replication));
  const auto est_seed = substream_seed(seed, Stream::Replication, static_cast<std::uint64_t>(replication), 1);
  const Matrix Y = EllipticalSampler(EllipticalModel::standard(d)).draw_rows(n, rep_seed);
  const Matrix X = contaminate(Y, spec, rep_seed).X;
  CellOutcome out;
  for (const auto& name : estimators) {
    try {
      const Vector mu = location_by_name(name, X, est_seed, cfg);
      out.max_bias.push_back(max_abs_component(mu));
      out.mean_bias.push_back(mu.cwiseAbs().mean());
    } catch (const NumericalError&) {
      out.max_bias.push_back(kNaN);
      out.mean_bias.push_back(kNaN);
    }
  }
  return out;
}

}  // namespace

Json to_json(const BiasSweepOptions& o) {
  return {{"d", o.d},
          {"n", o.n},
          {"eps", o.eps},
          {"model", to_string(o.model)},
          {"t_grid", grid_json(o.t_grid.empty() ? arithmetic_grid(0, 100, 5) : o.t_grid)},
          {"estimators", o.estimators},
          {"replications", o.replications},
          {"estimator_config", to_json(o.cfg)},
          {"bias", "max_j |T_j| averaged over replications"},
          {"seed", o.seed},
          {"threads", o.threads}};
}

BiasSweepOptions bias_sweep_from_json(const Json& j) {
  BiasSweepOptions o;
  o.d = j.value("d", o.d);
  o.n = j.value("n", o.n);
  o.eps = j.value("eps", o.eps);
  if (j.contains("model")) o.model = parse_contamination_model(j["model"].get<std::string>());
  if (j.contains("t_grid")) o.t_grid = grid_from(j["t_grid"]);
  if (j.contains("estimators")) o.estimators = j["estimators"].get<std::vector<std::string>>();
  o.replications = j.value("replications", o.replications);
  if (j.contains("estimator_config")) o.cfg = sweep_from_json(j["estimator_config"]);
  o.seed = j.value("seed", o.seed);
  o.threads = j.value("threads", o.threads);
  return o;
}

ExperimentReport bias_sweep(const BiasSweepOptions& opts) {
  check_estimators(opts.estimators);
  if (opts.replications < 1) throw std::invalid_argument("bias_sweep: need at least one replication");
  const std::vector<double> t_grid = opts.t_grid.empty() ? arithmetic_grid(0, 100, 5) : opts.t_grid;
  const std::size_t n_t = t_grid.size();
  const auto n_rep = static_cast<std::size_t>(opts.replications);
  const std::size_t n_est = opts.estimators.size();

  std::vector<CellOutcome> cells(n_t * n_rep);
  parallel_for(cells.size(), opts.threads, [&](std::size_t c) {
    ContaminationSpec spec;
    spec.model = opts.model;
    spec.epsilon = opts.eps;
    spec.outlier = OutlierGen::additive_shift(t_grid[c / n_rep]);
    cells[c] = run_cell(opts.estimators, opts.d, opts.n, spec, opts.seed, static_cast<int>(c % n_rep), opts.cfg);
  });

  ExperimentReport rep;
  rep.name = "fig4";
  rep.config = to_json(opts);
  rep.config["command"] = "fig4";

  CsvTable results({"t", "estimator", "replication", "max_bias"});
  CsvTable curve({"t", "estimator", "mean_max_bias", "mean_abs_bias", "failures"});
  std::vector<std::vector<double>> mean_curve(n_est, std::vector<double>(n_t));
  std::vector<std::vector<double>> abs_curve(n_est, std::vector<double>(n_t));
  for (std::size_t ti = 0; ti < n_t; ++ti) {
    for (std::size_t e = 0; e < n_est; ++e) {
      std::vector<double> maxes;
      std::vector<double> avgs;
      for (std::size_t r = 0; r < n_rep; ++r) {
        const CellOutcome& cell = cells[ti * n_rep + r];
        results.add_row({fmt(t_grid[ti]), opts.estimators[e], std::to_string(r), fmt(cell.max_bias[e])});
        maxes.push_back(cell.max_bias[e]);
        avgs.push_back(cell.mean_bias[e]);
      }
      int missing = 0;
      mean_curve[e][ti] = mean_finite(maxes, &missing);
      abs_curve[e][ti] = mean_finite(avgs);
      curve.add_row({fmt(t_grid[ti]), opts.estimators[e], fmt(mean_curve[e][ti]), fmt(abs_curve[e][ti]),
                     std::to_string(missing)});
    }
  }
  rep.tables.emplace_back("results.csv", results.text());
  rep.tables.emplace_back("curve.csv", curve.text());

  std::vector<SvgSeries> series;
  for (std::size_t e = 0; e < n_est; ++e) series.push_back({opts.estimators[e], t_grid, mean_curve[e]});
  rep.figures.emplace_back("curve.svg", svg_line_chart("Largest componentwise bias", "t", "bias", series));

  auto index_of = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(opts.estimators.begin(), opts.estimators.end(), name);
    return it == opts.estimators.end() ? -1 : it - opts.estimators.begin();
  };

  for (std::size_t ti = 0; ti < n_t; ++ti) {
    if (t_grid[ti] != 0.0) continue;
    double worst = 0.0;
    for (std::size_t e = 0; e < n_est; ++e) worst = std::max(worst, mean_curve[e][ti]);
    rep.assertions.push_back({"all curves below 0.5 at t=0", worst < 0.5, "largest " + fmt(worst)});
  }
  if (const auto e = index_of("coord-median"); e >= 0) {
    double worst = 0.0;
    for (std::size_t ti = 0; ti < n_t; ++ti)
      if (t_grid[ti] <= 100.0) worst = std::max(worst, mean_curve[static_cast<std::size_t>(e)][ti]);
    rep.assertions.push_back({"coord-median bias below 1.0", worst < 1.0, "largest " + fmt(worst)});
  }
  for (const char* name : {"mcd", "mve"}) {
    const auto e = index_of(name);
    if (e < 0) continue;
    const auto& c = mean_curve[static_cast<std::size_t>(e)];
    bool monotone = true;
    std::string where;
    for (std::size_t ti = 0; ti + 1 < n_t; ++ti) {
      if (t_grid[ti] < 10.0) continue;
      if (!(c[ti + 1] >= c[ti])) {
        monotone = false;
        where += " t=" + fmt(t_grid[ti + 1]);
      }
    }
    rep.assertions.push_back({std::string(name) + " bias nondecreasing beyond t=10", monotone,
                              monotone ? "ok" : "decreases at" + where});
    for (std::size_t ti = 0; ti < n_t; ++ti) {
      if (t_grid[ti] != 100.0) continue;
      rep.assertions.push_back({std::string(name) + " bias above 5 at t=100", c[ti] > 5.0, "bias " + fmt(c[ti])});
    }
  }
  if (const auto e = index_of("mean"); e >= 0) {
    double worst = 0.0;
    double worst_avg = 0.0;
    for (std::size_t ti = 0; ti < n_t; ++ti) {
      if (t_grid[ti] <= 0.0) continue;
      const double target = opts.eps * t_grid[ti];
      worst = std::max(worst, std::abs(mean_curve[static_cast<std::size_t>(e)][ti] / target - 1.0));
      worst_avg = std::max(worst_avg, std::abs(abs_curve[static_cast<std::size_t>(e)][ti] / target - 1.0));
    }
    rep.metrics["mean_max_bias_relative_gap"] = worst;
    rep.metrics["mean_abs_bias_relative_gap"] = worst_avg;
    rep.assertions.push_back({"sample-mean bias within 20% of eps*t", worst <= 0.2,
                              "largest relative gap " + fmt(worst) + " (average component: " + fmt(worst_avg) + ")"});
  }
  return rep;
}

// ---------------------------------------------------------------------------

Json to_json(const GesVsDimOptions& o) {
  return {{"d_grid", o.d_grid},
          {"bp", o.bp},
          {"convention", to_string(o.convention)},
          {"norm", to_string(o.search.norm)},
          {"mc", {{"n_draws", o.mc.n_draws}, {"seed", o.mc.seed}, {"batch", o.mc.batch}, {"threads", o.mc.threads}}},
          {"search",
           {{"n_random_directions", o.search.n_random_directions},
            {"radial_points", o.search.radial_points},
            {"search_draws", o.search.search_draws},
            {"refine_rays", o.search.refine_rays},
            {"golden_iters", o.search.golden_iters}}},
          {"flat_tolerance", o.flat_tolerance}};
}

GesVsDimOptions ges_vs_dim_from_json(const Json& j) {
  GesVsDimOptions o;
  if (j.contains("d_grid")) o.d_grid = j["d_grid"].get<std::vector<int>>();
  o.bp = j.value("bp", o.bp);
  if (j.contains("convention")) o.convention = parse_convention(j["convention"].get<std::string>());
  if (j.contains("norm")) o.search.norm = parse_ges_norm(j["norm"].get<std::string>());
  if (j.contains("mc")) {
    const Json& m = j["mc"];
    o.mc.n_draws = m.value("n_draws", o.mc.n_draws);
    o.mc.seed = m.value("seed", o.mc.seed);
    o.mc.batch = m.value("batch", o.mc.batch);
    o.mc.threads = m.value("threads", o.mc.threads);
  }
  if (j.contains("search")) {
    const Json& s = j["search"];
    o.search.n_random_directions = s.value("n_random_directions", o.search.n_random_directions);
    o.search.radial_points = s.value("radial_points", o.search.radial_points);
    o.search.search_draws = s.value("search_draws", o.search.search_draws);
    o.search.refine_rays = s.value("refine_rays", o.search.refine_rays);
    o.search.golden_iters = s.value("golden_iters", o.search.golden_iters);
  }
  o.flat_tolerance = j.value("flat_tolerance", o.flat_tolerance);
  return o;
}

ExperimentReport ges_vs_dim(const GesVsDimOptions& opts) {
  for (int d : opts.d_grid)
    if (d < 1 || d > 20) throw std::invalid_argument("ges_vs_dim: dimensions must lie in [1, 20]");
  ExperimentReport rep;
  rep.name = "fig2";
  rep.config = to_json(opts);
  rep.config["command"] = "fig2";

  const RhoSpec rho1 = RhoSpec::tukey(calibrate_c(1, opts.bp, opts.convention), opts.convention);
  rep.config["c_coordinatewise"] = rho1.c;
  Json c_multi = Json::object();

  struct Point {
    double value;
    double se;
  };
  // [functional][kind][d index]
  std::array<std::array<std::vector<Point>, 2>, 2> curves;
  CsvTable table({"d", "estimator", "model_kind", "ges", "stderr"});
  const std::array<InfluenceKind, 2> kinds{InfluenceKind::FDCM, InfluenceKind::FICM};
  const std::array<std::string, 2> labels{"multivariate-s", "coordinatewise-s"};
  for (int d : opts.d_grid) {
    const RhoSpec rho_d = RhoSpec::tukey(calibrate_c(d, opts.bp, opts.convention), opts.convention);
    c_multi[std::to_string(d)] = rho_d.c;
    for (int f = 0; f < 2; ++f) {
      for (int k = 0; k < 2; ++k) {
        const auto functional = f == 0 ? LocationFunctional::Multivariate : LocationFunctional::Coordinatewise;
        const InfluenceContext ctx(EllipticalModel::standard(d), f == 0 ? rho_d : rho1, kinds[static_cast<std::size_t>(k)],
                                   opts.mc, functional);
        const GesResult g = ges(ctx, opts.search);
        curves[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)].push_back({g.value, g.se});
        table.add_row({std::to_string(d), labels[static_cast<std::size_t>(f)], to_string(kinds[static_cast<std::size_t>(k)]),
                       fmt(g.value), fmt(g.se)});
      }
    }
  }
  rep.config["c_multivariate"] = c_multi;
  rep.tables.emplace_back("results.csv", table.text());

  std::vector<double> xs(opts.d_grid.begin(), opts.d_grid.end());
  std::vector<SvgSeries> series;
  for (int f = 0; f < 2; ++f)
    for (int k = 0; k < 2; ++k) {
      SvgSeries s{labels[static_cast<std::size_t>(f)] + " " + to_string(kinds[static_cast<std::size_t>(k)]), xs, {}};
      for (const auto& p : curves[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)]) s.y.push_back(p.value);
      series.push_back(std::move(s));
    }
  rep.figures.emplace_back("ges.svg", svg_line_chart("Gross-error sensitivity", "d", "GES", series));

  auto close = [](const Point& a, const Point& b) {
    return std::abs(a.value - b.value) <= 3.0 * std::hypot(a.se, b.se) + 1e-9 * std::max(a.value, b.value);
  };
  const auto& coord = curves[1];
  for (std::size_t i = 0; i < opts.d_grid.size(); ++i) {
    if (opts.d_grid[i] == 1) {
      const Point ref = curves[0][0][i];
      const bool ok = close(ref, curves[0][1][i]) && close(ref, coord[0][i]) && close(ref, coord[1][i]);
      rep.assertions.push_back({"d=1 curves coincide", ok,
                                fmt(ref.value) + " " + fmt(curves[0][1][i].value) + " " + fmt(coord[0][i].value) + " " +
                                    fmt(coord[1][i].value)});
    }
  }
  bool equal = true;
  std::string detail;
  for (std::size_t i = 0; i < opts.d_grid.size(); ++i) {
    if (!close(coord[0][i], coord[1][i])) {
      equal = false;
      detail += " d=" + std::to_string(opts.d_grid[i]);
    }
  }
  rep.assertions.push_back({"coordinatewise GES equal across models", equal, equal ? "ok" : "differs at" + detail});
  for (int k = 0; k < 2; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& p : coord[static_cast<std::size_t>(k)]) {
      lo = std::min(lo, p.value);
      hi = std::max(hi, p.value);
    }
    const double spread = hi / lo - 1.0;
    rep.metrics["coordinatewise_relative_spread_" + to_string(kinds[static_cast<std::size_t>(k)])] = spread;
    rep.assertions.push_back({"coordinatewise GES flat in d (" + to_string(kinds[static_cast<std::size_t>(k)]) + ")",
                              spread <= opts.flat_tolerance,
                              "range " + fmt(lo) + " .. " + fmt(hi) + " (" + to_string(opts.search.norm) + " norm)"});
  }
  for (std::size_t i = 0; i < opts.d_grid.size(); ++i) {
    if (opts.d_grid[i] < 5) continue;
    const Point fd = curves[0][0][i];
    const Point fi = curves[0][1][i];
    rep.assertions.push_back({"multivariate FICM above FDCM d=" + std::to_string(opts.d_grid[i]),
                              fi.value - 3.0 * fi.se > fd.value, fmt(fi.value) + " vs " + fmt(fd.value)});
  }
  return rep;
}

// ---------------------------------------------------------------------------

Json to_json(const BreakdownOptions& o) {
  return {{"estimator", o.estimator},
          {"d", o.d},
          {"n", o.n},
          {"model", to_string(o.model)},
          {"eps_grid", grid_json(o.eps_grid.empty() ? arithmetic_grid(0.02, 0.5, 0.02) : o.eps_grid)},
          {"t_large", o.t_large},
          {"threshold", o.threshold},
          {"replications", o.replications},
          {"estimator_config", to_json(o.cfg)},
          {"seed", o.seed},
          {"threads", o.threads}};
}

BreakdownOptions breakdown_from_json(const Json& j) {
  BreakdownOptions o;
  o.estimator = j.value("estimator", o.estimator);
  o.d = j.value("d", o.d);
  o.n = j.value("n", o.n);
  if (j.contains("model")) o.model = parse_contamination_model(j["model"].get<std::string>());
  if (j.contains("eps_grid")) o.eps_grid = grid_from(j["eps_grid"]);
  o.t_large = j.value("t_large", o.t_large);
  o.threshold = j.value("threshold", o.threshold);
  o.replications = j.value("replications", o.replications);
  if (j.contains("estimator_config")) o.cfg = sweep_from_json(j["estimator_config"]);
  o.seed = j.value("seed", o.seed);
  o.threads = j.value("threads", o.threads);
  return o;
}

ExperimentReport empirical_breakdown(const BreakdownOptions& opts, BreakdownResult* result) {
  check_estimators({opts.estimator});
  const std::vector<double> grid = opts.eps_grid.empty() ? arithmetic_grid(0.02, 0.5, 0.02) : opts.eps_grid;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("empirical_breakdown: eps grid must increase");
  if (opts.replications < 1) throw std::invalid_argument("empirical_breakdown: need at least one replication");
  const auto n_rep = static_cast<std::size_t>(opts.replications);

  std::vector<CellOutcome> cells(grid.size() * n_rep);
  parallel_for(cells.size(), opts.threads, [&](std::size_t c) {
    ContaminationSpec spec;
    spec.model = opts.model;
    spec.epsilon = grid[c / n_rep];
    spec.outlier = OutlierGen::additive_shift(opts.t_large);
    cells[c] = run_cell({opts.estimator}, opts.d, opts.n, spec, opts.seed, static_cast<int>(c % n_rep), opts.cfg);
  });

  ExperimentReport rep;
  rep.name = "breakdown";
  rep.config = to_json(opts);
  rep.config["command"] = "breakdown";

  BreakdownResult res;
  res.bound = epsilon0(0.0, opts.d);
  res.eps_star_hat = kNaN;
  CsvTable results({"eps", "replication", "max_bias"});
  CsvTable curve({"eps", "mean_max_bias", "failures"});
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> v;
    for (std::size_t r = 0; r < n_rep; ++r) {
      const double b = cells[g * n_rep + r].max_bias[0];
      results.add_row({fmt(grid[g]), std::to_string(r), fmt(b)});
      v.push_back(b);
    }
    int missing = 0;
    const double m = mean_finite(v, &missing);
    res.mean_bias.push_back(m);
    curve.add_row({fmt(grid[g]), fmt(m), std::to_string(missing)});
    if (std::isnan(res.eps_star_hat) && m > opts.threshold) res.eps_star_hat = grid[g];
  }
  rep.tables.emplace_back("results.csv", results.text());
  rep.tables.emplace_back("curve.csv", curve.text());
  rep.figures.emplace_back("curve.svg", svg_line_chart("Bias at t = " + fmt(opts.t_large), "eps", "bias",
                                                       {{opts.estimator, grid, res.mean_bias}}));
  rep.metrics["eps_star_hat"] = std::isnan(res.eps_star_hat) ? Json(nullptr) : Json(res.eps_star_hat);
  rep.metrics["bound"] = res.bound;

  // Bias may wobble at the clean-noise level or by a few percent once broken.
  bool monotone = true;
  std::string where;
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    const double a = res.mean_bias[g];
    const double b = res.mean_bias[g + 1];
    if (b < a - std::max(0.5, 0.05 * a)) {
      monotone = false;
      where += " eps=" + fmt(grid[g + 1]);
    }
  }
  rep.assertions.push_back({"bias nondecreasing in eps", monotone, monotone ? "ok" : "drops at" + where});

  const double step = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
  if (opts.estimator == "mcd" || opts.estimator == "mve" || opts.estimator == "s") {
    const bool ok = !std::isnan(res.eps_star_hat) && res.eps_star_hat <= res.bound + step + 1e-12;
    rep.assertions.push_back({"breakdown at most the bound plus one grid step", ok,
                              "eps* " + fmt(res.eps_star_hat) + " bound " + fmt(res.bound)});
  } else if (opts.estimator == "coord-median") {
    const bool ok = std::isnan(res.eps_star_hat) || res.eps_star_hat > 0.45;
    rep.assertions.push_back({"no breakdown up to eps=0.45", ok, "eps* " + fmt(res.eps_star_hat)});
  }
  if (result) *result = res;
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<double> arithmetic_grid(double start, double stop, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  if (stop < start) throw std::invalid_argument("grid stop precedes start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 10000000) throw std::invalid_argument("grid is too large");
  std::vector<double> out;
  for (long i = 0; i < count; ++i) out.push_back(std::round((start + i * step) * 1e12) / 1e12);
  return out;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::array<double, 3> parts{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t next = spec.find(':', pos);
    if ((i < 2) == (next == std::string::npos)) throw std::invalid_argument("grid must be start:stop:step: " + spec);
    const std::string token = spec.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    std::size_t used = 0;
    try {
      parts[static_cast<std::size_t>(i)] = std::stod(token, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("grid must be start:stop:step: " + spec);
    }
    if (used != token.size()) throw std::invalid_argument("grid must be start:stop:step: " + spec);
    pos = next + 1;
  }
  return arithmetic_grid(parts[0], parts[1], parts[2]);
}

}  // namespace opl
