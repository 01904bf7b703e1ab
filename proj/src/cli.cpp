#include "opl/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "opl/contamination.hpp"
#include "opl/errors.hpp"
#include "opl/estimators.hpp"
#include "opl/experiments.hpp"
#include "opl/influence.hpp"
#include "opl/radial.hpp"

namespace opl {

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("OPL_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("OPL_SEED is not an unsigned integer");
  }
  return 1;
}

std::vector<double> parse_list(const std::string& text) {
  if (text.find(':') != std::string::npos) return parse_grid(text);
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      throw std::invalid_argument("not a number list: " + text);
    }
    if (used != item.size()) throw std::invalid_argument("not a number list: " + text);
  }
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

EllipticalModel core_model(int d, double r) {
  return r == 0.0 ? EllipticalModel::standard(d) : EllipticalModel::equicorrelated(d, r);
}

ContaminationSpec spec_from_config(const Json& c) {
  ContaminationSpec spec;
  spec.model = parse_contamination_model(c.at("model").get<std::string>());
  spec.epsilon = c.at("eps").get<double>();
  spec.gamma = c.value("gamma", 0.5);
  const Json& o = c.at("outlier");
  const std::string kind = o.at("kind").get<std::string>();
  if (kind == "point-mass") spec.outlier = OutlierGen::point_mass(vector_from_json(o.at("z")));
  else if (kind == "gaussian-shift")
    spec.outlier = OutlierGen::gaussian_shift(vector_from_json(o.at("mean")), o.at("var").get<double>());
  else if (kind == "additive-shift") spec.outlier = OutlierGen::additive_shift(o.at("t").get<double>());
  else throw std::invalid_argument("unknown outlier kind: " + kind);
  return spec;
}

MonteCarloOptions mc_from_config(const Json& c) {
  MonteCarloOptions mc;
  mc.n_draws = c.value("draws", mc.n_draws);
  mc.seed = c.at("seed").get<std::uint64_t>();
  mc.threads = c.value("threads", 1u);
  return mc;
}

// ---------------------------------------------------------------------------

void run_simulate(const Json& c, const std::filesystem::path& out_file, std::ostream& out) {
  const ContaminationSpec spec = spec_from_config(c);
  const int d = c.at("d").get<int>();
  const ContaminatedData data = simulate(core_model(d, c.value("r", 0.0)), spec, c.at("n").get<int>(),
                                         c.at("seed").get<std::uint64_t>(), c.value("threads", 1u));
  write_text_file(out_file, dataset_csv(data.X, &data.B));
  out << "wrote " << out_file.string() << " (" << data.X.rows() << " rows)\n";
}

void run_estimate(const Json& c, const std::filesystem::path& dir, std::ostream& out) {
  const Matrix X = read_dataset_csv(c.at("in").get<std::string>());
  const std::string name = c.at("estimator").get<std::string>();
  const auto seed = c.at("seed").get<std::uint64_t>();
  LocationScatter est;
  Json extra = Json::object();
  if (name == "mean") {
    est = sample_mean(X);
  } else if (name == "coord-median") {
    est.mu = coord_median(X);
  } else if (name == "coord-s") {
    const CoordinatewiseS s = coord_s(X, c.at("bp").get<double>());
    est.mu = s.mu;
    extra["scale"] = to_json(s.scale);
  } else if (name == "mcd") {
    McdOptions o;
    o.n_starts = c.at("starts").get<int>();
    o.seed = seed;
    o.threads = c.value("threads", 1u);
    const McdFit f = mcd(X, o);
    est = f.est;
    extra["h"] = f.h;
    extra["subset"] = f.subset;
  } else if (name == "mve") {
    MveOptions o;
    o.n_trials = c.at("trials").get<int>();
    o.seed = seed;
    const MveFit f = mve(X, o);
    est = f.est;
    extra["log_volume"] = f.log_volume;
  } else if (name == "s") {
    SOptions o;
    o.bp = c.at("bp").get<double>();
    o.n_starts = c.at("s_starts").get<int>();
    o.seed = seed;
    const SFit f = s_estimate(X, o);
    est = f.est;
    extra["c"] = f.rho.c;
    extra["scale"] = f.scale;
  } else if (name == "m") {
    McdOptions o;
    o.n_starts = c.at("starts").get<int>();
    o.seed = seed;
    const McdFit init = mcd(X, o);
    const RhoSpec rho = RhoSpec::tukey(c.at("c").get<double>(), parse_convention(c.at("convention").get<std::string>()));
    est = m_location(X, *init.est.sigma, rho).est;
  } else {
    throw std::invalid_argument("unknown estimator: " + name);
  }
  Json j = to_json(est, name, seed);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json_file(dir / "estimate.json", j);
  out << j.dump(2) << "\n";
}

void run_influence(const Json& c, const std::filesystem::path& dir, std::ostream& out) {
  const int d = c.at("d").get<int>();
  if (d < 1) throw std::invalid_argument("influence: d must be >= 1");
  const RhoSpec rho = RhoSpec::tukey(c.at("c").get<double>(), parse_convention(c.at("convention").get<std::string>()));
  const auto functional = c.at("functional").get<std::string>() == "coordinatewise" ? LocationFunctional::Coordinatewise
                                                                                      : LocationFunctional::Multivariate;
  const InfluenceContext ctx(core_model(d, c.value("r", 0.0)), rho, parse_influence_kind(c.at("kind").get<std::string>()),
                             mc_from_config(c), functional);
  const std::vector<double> grid = parse_grid(c.at("grid").get<std::string>());

  std::vector<std::string> header;
  for (const char* p : {"z", "if", "se"})
    for (int j = 1; j <= d; ++j) header.push_back(p + std::to_string(j));
  CsvTable table(header);
  ExperimentReport rep;
  rep.name = "influence";
  rep.config = c;
  bool se_ok = true;
  double cross = 0.0;
  double cross_se = 0.0;
  const std::size_t second_axis = d >= 2 ? grid.size() : 1;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = 0; b < second_axis; ++b) {
      Vector z = ctx.model().mu0;
      z[0] = grid[a];
      if (d >= 2) z[1] = grid[b];
      const InfluenceResult r = influence(z, ctx);
      std::vector<std::string> row;
      for (int j = 0; j < d; ++j) row.push_back(format_number(z[j]));
      for (int j = 0; j < d; ++j) row.push_back(format_number(r.value[j]));
      for (int j = 0; j < d; ++j) row.push_back(format_number(r.se[j]));
      table.add_row(row);
      if ((r.se.array() < 0.0).any()) se_ok = false;
      if (d >= 2 && z[1] == ctx.model().mu0[1] && std::abs(r.value[1]) > cross) {
        cross = std::abs(r.value[1]);
        cross_se = r.se[1];
      }
    }
  }
  rep.tables.emplace_back("results.csv", table.text());
  rep.metrics["a_psi"] = ctx.a_psi();
  rep.metrics["largest_cross_influence"] = cross;
  rep.assertions.push_back({"standard errors nonnegative", se_ok, ""});
  if (d >= 2 && c.value("r", 0.0) != 0.0 && ctx.kind() != InfluenceKind::FDCM) {
    rep.assertions.push_back({"contamination in z1 moves component 2", cross > 3.0 * cross_se,
                              "largest |IF_2| on the z2 = mu2 line " + format_number(cross)});
  }
  rep.write(dir.parent_path());
  out << "wrote " << (dir / "results.csv").string() << "\n";
}

void run_ges(const Json& c, const std::filesystem::path& dir, std::ostream& out) {
  const int d = c.at("d").get<int>();
  const ArgumentConvention conv = parse_convention(c.at("convention").get<std::string>());
  const bool coordinatewise = c.at("functional").get<std::string>() == "coordinatewise";
  const double bp = c.at("bp").get<double>();
  const RhoSpec rho = RhoSpec::tukey(calibrate_c(coordinatewise ? 1 : d, bp, conv), conv);
  const InfluenceKind kind = parse_influence_kind(c.at("kind").get<std::string>());
  const InfluenceContext ctx(core_model(d, c.value("r", 0.0)), rho, kind, mc_from_config(c),
                             coordinatewise ? LocationFunctional::Coordinatewise : LocationFunctional::Multivariate);
  GesSearch search;
  search.norm = parse_ges_norm(c.at("norm").get<std::string>());
  const GesResult g = ges(ctx, search);

  ExperimentReport rep;
  rep.name = "ges";
  rep.config = c;
  std::vector<std::string> header{"d", "estimator", "model_kind", "ges", "stderr"};
  for (int j = 1; j <= d; ++j) header.push_back("argmax_z" + std::to_string(j));
  CsvTable table(header);
  std::vector<std::string> row{std::to_string(d), coordinatewise ? "coordinatewise-s" : "multivariate-s",
                               to_string(kind), format_number(g.value), format_number(g.se)};
  for (int j = 0; j < d; ++j) row.push_back(format_number(g.argmax_z[j]));
  table.add_row(row);
  rep.tables.emplace_back("results.csv", table.text());
  rep.metrics["c"] = rho.c;
  rep.metrics["ges"] = g.value;
  rep.assertions.push_back({"ges nonnegative", g.value >= 0.0, format_number(g.value)});
  rep.write(dir.parent_path());
  out << "ges " << format_number(g.value) << " (stderr " << format_number(g.se) << ")\n";
}

void finish(const ExperimentReport& rep, const std::filesystem::path& out_dir, std::ostream& out) {
  rep.write(out_dir);
  for (const auto& a : rep.assertions)
    out << (a.pass ? "PASS " : "FAIL ") << a.name << (a.detail.empty() ? "" : ": " + a.detail) << "\n";
}

}  // namespace

void run_config(const Json& c, const std::filesystem::path& out_dir, std::ostream& out) {
  const std::string command = c.at("command").get<std::string>();
  if (command == "simulate") {
    const std::filesystem::path file = c.at("out").get<std::string>();
    Json sidecar = c;
    std::filesystem::path meta = file;
    meta.replace_extension(".json");
    write_json_file(meta, sidecar);
    run_simulate(c, file, out);
    return;
  }
  static const std::vector<std::string> known{"estimate", "influence", "ges", "table1",
                                            "fig2", "fig3", "fig4", "breakdown"};
  if (std::find(known.begin(), known.end(), command) == known.end())
    throw std::invalid_argument("unknown command: " + command);
  const auto dir = out_dir / command;
  std::filesystem::create_directories(dir);
  write_json_file(dir / "config.json", c);
  if (command == "estimate") return run_estimate(c, dir, out);
  if (command == "influence") return run_influence(c, dir, out);
  if (command == "ges") return run_ges(c, dir, out);
  if (command == "table1") {
    ExperimentReport rep = table1_report();
    rep.config = c;
    return finish(rep, out_dir, out);
  }
  if (command == "fig2") {
    ExperimentReport rep = ges_vs_dim(ges_vs_dim_from_json(c));
    rep.config = c;
    return finish(rep, out_dir, out);
  }
  if (command == "fig3") {
    ExperimentReport rep = propagation_demo(propagation_from_json(c));
    rep.config = c;
    return finish(rep, out_dir, out);
  }
  if (command == "fig4") {
    ExperimentReport rep = bias_sweep(bias_sweep_from_json(c));
    rep.config = c;
    return finish(rep, out_dir, out);
  }
  if (command == "breakdown") {
    ExperimentReport rep = empirical_breakdown(breakdown_from_json(c));
    rep.config = c;
    return finish(rep, out_dir, out);
  }
}

// ---------------------------------------------------------------------------

namespace {

// CLI11 reads a leading '-' as a flag, so "--grid -8:8:1" becomes "--grid=-8:8:1".
std::vector<std::string> glue_negative_values(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('=') == std::string::npos && i + 1 < args.size()) {
      const std::string& next = args[i + 1];
      if (next.size() > 1 && next[0] == '-' && (std::isdigit(static_cast<unsigned char>(next[1])) || next[1] == '.')) {
        out.push_back(a + "=" + next);
        ++i;
        continue;
      }
    }
    out.push_back(a);
  }
  return out;
}

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "results";
};

void add_common(CLI::App* sub, Common& c, const std::string& out_help) {
  sub->add_option("--seed", c.seed, "master seed (default: $OPL_SEED or 1)");
  sub->add_option("--threads", c.threads, "worker threads (0 = hardware)");
  sub->add_option("--out", c.out, out_help)->capture_default_str();
}

Json outlier_json(const std::string& kind, double shift, const std::string& point, const std::string& mean,
                  double var, int d) {
  if (kind == "additive-shift") return {{"kind", kind}, {"t", shift}};
  if (kind == "point-mass") {
    const auto z = parse_list(point);
    if (static_cast<int>(z.size()) != d) throw std::invalid_argument("--point needs d values");
    return {{"kind", kind}, {"z", z}};
  }
  if (kind == "gaussian-shift") {
    auto m = parse_list(mean);
    if (m.size() == 1) m.assign(static_cast<std::size_t>(d), m[0]);
    if (static_cast<int>(m.size()) != d) throw std::invalid_argument("--gauss-mean needs 1 or d values");
    return {{"kind", kind}, {"mean", m}, {"var", var}};
  }
  throw std::invalid_argument("unknown outlier kind: " + kind);
}

}  // namespace

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust location/scatter under cellwise and rowwise contamination", "opl"};
  app.require_subcommand(1, 1);
  Common common;
  try {
    common.seed = default_seed();
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 1;
  }

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a contaminated Gaussian sample");
  std::string sim_model = "ficm", outlier_kind = "additive-shift", point = "", gauss_mean = "10";
  double sim_eps = 0.1, sim_gamma = 0.5, shift = 10.0, gauss_var = 1.0, sim_r = 0.0;
  int sim_d = 2, sim_n = 100;
  Common sim_common = common;
  sim_common.out = "data.csv";
  sim->add_option("--model", sim_model, "fdcm|ficm|psicm|pcicm-i|pcicm-ii")->capture_default_str();
  sim->add_option("--eps", sim_eps)->capture_default_str();
  sim->add_option("--gamma", sim_gamma, "PCICM-i row probability")->capture_default_str();
  sim->add_option("--d", sim_d)->capture_default_str();
  sim->add_option("--n", sim_n)->capture_default_str();
  sim->add_option("--r", sim_r, "common correlation of the core model")->capture_default_str();
  sim->add_option("--outlier", outlier_kind, "additive-shift|point-mass|gaussian-shift")->capture_default_str();
  sim->add_option("--shift", shift, "additive shift t")->capture_default_str();
  sim->add_option("--point", point, "point-mass z as a comma list");
  sim->add_option("--gauss-mean", gauss_mean, "gaussian-shift mean (1 or d values)")->capture_default_str();
  sim->add_option("--gauss-var", gauss_var)->capture_default_str();
  add_common(sim, sim_common, "CSV file (a .json sidecar is written next to it)");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate location/scatter from a dataset CSV");
  std::string est_in, est_name = "s", est_conv = "squared";
  double est_bp = 0.5, est_c = std::sqrt(6.0);
  int est_starts = 500, est_trials = 3000, est_s_starts = 20;
  Common est_common = common;
  est->add_option("--in", est_in, "dataset CSV (x-columns are used)")->required();
  est->add_option("--estimator", est_name, "mean|coord-median|coord-s|m|s|mcd|mve")->capture_default_str();
  est->add_option("--bp", est_bp)->capture_default_str();
  est->add_option("--c", est_c, "tuning constant for m")->capture_default_str();
  est->add_option("--convention", est_conv, "squared|scaled (m)")->capture_default_str();
  est->add_option("--starts", est_starts, "MCD elemental starts")->capture_default_str();
  est->add_option("--trials", est_trials, "MVE elemental trials")->capture_default_str();
  est->add_option("--s-starts", est_s_starts, "S-estimator elemental starts")->capture_default_str();
  add_common(est, est_common, "output directory");

  // influence
  auto* inf = app.add_subcommand("influence", "influence-function surface on a z-grid");
  std::string inf_kind = "ficm", inf_grid = "-8:8:0.25", inf_conv = "squared", inf_functional = "multivariate";
  int inf_d = 2, inf_draws = 200000;
  double inf_r = 0.0, inf_c = std::sqrt(6.0);
  Common inf_common = common;
  inf->add_option("--kind", inf_kind, "fdcm|ficm|psicm|pcicm")->capture_default_str();
  inf->add_option("--d", inf_d)->capture_default_str();
  inf->add_option("--r", inf_r, "common correlation of the core model")->capture_default_str();
  inf->add_option("--grid", inf_grid, "start:stop:step for z1 and z2")->capture_default_str();
  inf->add_option("--c", inf_c)->capture_default_str();
  inf->add_option("--convention", inf_conv, "squared|scaled")->capture_default_str();
  inf->add_option("--functional", inf_functional, "multivariate|coordinatewise")->capture_default_str();
  inf->add_option("--draws", inf_draws, "Monte Carlo draws")->capture_default_str();
  add_common(inf, inf_common, "output directory");

  // ges
  auto* gs = app.add_subcommand("ges", "gross-error sensitivity of a 50% breakdown S functional");
  std::string ges_kind = "ficm", ges_conv = "scaled", ges_functional = "multivariate", ges_norm = "l2";
  int ges_d = 2, ges_draws = 200000;
  double ges_bp = 0.5, ges_r = 0.0;
  Common ges_common = common;
  gs->add_option("--kind", ges_kind, "fdcm|ficm|psicm|pcicm")->capture_default_str();
  gs->add_option("--d", ges_d)->capture_default_str();
  gs->add_option("--r", ges_r)->capture_default_str();
  gs->add_option("--bp", ges_bp)->capture_default_str();
  gs->add_option("--convention", ges_conv, "squared|scaled")->capture_default_str();
  gs->add_option("--functional", ges_functional, "multivariate|coordinatewise")->capture_default_str();
  gs->add_option("--norm", ges_norm, "l2|linf")->capture_default_str();
  gs->add_option("--draws", ges_draws)->capture_default_str();
  add_common(gs, ges_common, "output directory");

  // table1
  auto* t1 = app.add_subcommand("table1", "breakdown upper bound by dimension");
  Common t1_common = common;
  add_common(t1, t1_common, "output directory");

  // fig2
  auto* f2 = app.add_subcommand("fig2", "GES against dimension");
  std::string f2_dims = "1,2,3,5,10,15,20", f2_conv = "scaled", f2_norm = "l2";
  double f2_bp = 0.5;
  int f2_draws = 200000;
  Common f2_common = common;
  f2->add_option("--d-grid", f2_dims, "dimensions (list or start:stop:step)")->capture_default_str();
  f2->add_option("--bp", f2_bp)->capture_default_str();
  f2->add_option("--convention", f2_conv)->capture_default_str();
  f2->add_option("--norm", f2_norm, "l2|linf")->capture_default_str();
  f2->add_option("--draws", f2_draws)->capture_default_str();
  add_common(f2, f2_common, "output directory");

  // fig3
  auto* f3 = app.add_subcommand("fig3", "propagation of cellwise outliers through a linear map");
  PropagationOptions f3o;
  std::string f3_transform = "0.64,0.77,0.78,0.62";
  Common f3_common = common;
  f3->add_option("--n", f3o.n)->capture_default_str();
  f3->add_option("--eps", f3o.eps)->capture_default_str();
  f3->add_option("--shift-mean", f3o.shift_mean)->capture_default_str();
  f3->add_option("--shift-var", f3o.shift_var)->capture_default_str();
  f3->add_option("--transform", f3_transform, "row-major 2x2 matrix")->capture_default_str();
  f3->add_option("--bins", f3o.bins)->capture_default_str();
  add_common(f3, f3_common, "output directory");

  // fig4
  auto* f4 = app.add_subcommand("fig4", "largest componentwise bias against outlier shift");
  BiasSweepOptions f4o;
  std::string f4_model = "ficm", f4_t = "0:100:5", f4_est = "mean,coord-median,mcd,mve";
  Common f4_common = common;
  f4->add_option("--d", f4o.d)->capture_default_str();
  f4->add_option("--n", f4o.n)->capture_default_str();
  f4->add_option("--eps", f4o.eps)->capture_default_str();
  f4->add_option("--model", f4_model)->capture_default_str();
  f4->add_option("--t-grid", f4_t)->capture_default_str();
  f4->add_option("--estimators", f4_est)->capture_default_str();
  f4->add_option("--reps", f4o.replications)->capture_default_str();
  f4->add_option("--mcd-starts", f4o.cfg.mcd_starts)->capture_default_str();
  f4->add_option("--mve-trials", f4o.cfg.mve_trials)->capture_default_str();
  add_common(f4, f4_common, "output directory");

  // breakdown
  auto* bd = app.add_subcommand("breakdown", "empirical breakdown point under large shifts");
  BreakdownOptions bdo;
  std::string bd_model = "ficm", bd_grid = "0.02:0.5:0.02";
  Common bd_common = common;
  bd->add_option("--estimator", bdo.estimator, "mean|coord-median|coord-s|mcd|mve|s")->capture_default_str();
  bd->add_option("--d", bdo.d)->capture_default_str();
  bd->add_option("--n", bdo.n)->capture_default_str();
  bd->add_option("--model", bd_model)->capture_default_str();
  bd->add_option("--eps-grid", bd_grid)->capture_default_str();
  bd->add_option("--t-large", bdo.t_large)->capture_default_str();
  bd->add_option("--threshold", bdo.threshold)->capture_default_str();
  bd->add_option("--reps", bdo.replications)->capture_default_str();
  bd->add_option("--mcd-starts", bdo.cfg.mcd_starts)->capture_default_str();
  bd->add_option("--mve-trials", bdo.cfg.mve_trials)->capture_default_str();
  add_common(bd, bd_common, "output directory");

  // replay
  auto* rp = app.add_subcommand("replay", "rerun from an emitted config.json");
  std::string rp_config, rp_out = "results";
  rp->add_option("--config", rp_config)->required();
  rp->add_option("--out", rp_out, "output directory")->capture_default_str();

  std::vector<std::string> args = glue_negative_values(raw_args);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    Json config;
    std::filesystem::path out_dir;
    if (sim->parsed()) {
      config = {{"command", "simulate"}, {"model", sim_model}, {"eps", sim_eps}, {"gamma", sim_gamma},
                {"d", sim_d}, {"n", sim_n}, {"r", sim_r},
                {"outlier", outlier_json(outlier_kind, shift, point, gauss_mean, gauss_var, sim_d)},
                {"seed", sim_common.seed}, {"threads", sim_common.threads}, {"out", sim_common.out}};
      spec_from_config(config).validate();
    } else if (est->parsed()) {
      config = {{"command", "estimate"}, {"in", est_in}, {"estimator", est_name}, {"bp", est_bp},
                {"c", est_c}, {"convention", est_conv}, {"starts", est_starts}, {"trials", est_trials},
                {"s_starts", est_s_starts}, {"seed", est_common.seed}, {"threads", est_common.threads}};
      out_dir = est_common.out;
    } else if (inf->parsed()) {
      parse_influence_kind(inf_kind);
      parse_grid(inf_grid);
      config = {{"command", "influence"}, {"kind", inf_kind}, {"d", inf_d}, {"r", inf_r}, {"grid", inf_grid},
                {"c", inf_c}, {"convention", inf_conv}, {"functional", inf_functional}, {"draws", inf_draws},
                {"seed", inf_common.seed}, {"threads", inf_common.threads}};
      out_dir = inf_common.out;
    } else if (gs->parsed()) {
      config = {{"command", "ges"}, {"kind", ges_kind}, {"d", ges_d}, {"r", ges_r}, {"bp", ges_bp},
                {"convention", ges_conv}, {"functional", ges_functional}, {"norm", ges_norm},
                {"draws", ges_draws}, {"seed", ges_common.seed}, {"threads", ges_common.threads}};
      out_dir = ges_common.out;
    } else if (t1->parsed()) {
      config = table1_report().config;
      out_dir = t1_common.out;
    } else if (f2->parsed()) {
      GesVsDimOptions o;
      o.d_grid.clear();
      for (double v : parse_list(f2_dims)) o.d_grid.push_back(static_cast<int>(v));
      o.bp = f2_bp;
      o.convention = parse_convention(f2_conv);
      o.search.norm = parse_ges_norm(f2_norm);
      o.mc.n_draws = f2_draws;
      o.mc.seed = f2_common.seed;
      o.mc.threads = f2_common.threads;
      config = to_json(o);
      config["command"] = "fig2";
      out_dir = f2_common.out;
    } else if (f3->parsed()) {
      const auto t = parse_list(f3_transform);
      if (t.size() != 4) throw std::invalid_argument("--transform needs four values");
      f3o.transform = (Matrix(2, 2) << t[0], t[1], t[2], t[3]).finished();
      f3o.seed = f3_common.seed;
      f3o.threads = f3_common.threads;
      config = to_json(f3o);
      config["command"] = "fig3";
      out_dir = f3_common.out;
    } else if (f4->parsed()) {
      f4o.model = parse_contamination_model(f4_model);
      f4o.t_grid = parse_list(f4_t);
      f4o.estimators = split_names(f4_est);
      f4o.seed = f4_common.seed;
      f4o.threads = f4_common.threads;
      config = to_json(f4o);
      config["command"] = "fig4";
      out_dir = f4_common.out;
    } else if (bd->parsed()) {
      bdo.model = parse_contamination_model(bd_model);
      bdo.eps_grid = parse_list(bd_grid);
      bdo.seed = bd_common.seed;
      bdo.threads = bd_common.threads;
      config = to_json(bdo);
      config["command"] = "breakdown";
      out_dir = bd_common.out;
    } else if (rp->parsed()) {
      config = read_json_file(rp_config);
      out_dir = rp_out;
    }
    run_config(config, out_dir, out);
    return 0;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad config: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace opl
