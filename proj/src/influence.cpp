#include "opl/influence.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "opl/errors.hpp"
#include "opl/estimators.hpp"
#include "opl/parallel.hpp"
#include "opl/radial.hpp"

namespace opl {

std::string to_string(InfluenceKind kind) {
  switch (kind) {
    case InfluenceKind::FDCM: return "fdcm";
    case InfluenceKind::FICM: return "ficm";
    case InfluenceKind::PSICM: return "psicm";
    case InfluenceKind::PCICM: return "pcicm";
  }
  return "?";
}

InfluenceKind parse_influence_kind(const std::string& name) {
  if (name == "fdcm") return InfluenceKind::FDCM;
  if (name == "ficm") return InfluenceKind::FICM;
  if (name == "psicm") return InfluenceKind::PSICM;
  if (name == "pcicm" || name == "pcicm-i" || name == "pcicm-ii") return InfluenceKind::PCICM;
  throw std::invalid_argument("unknown influence kind: " + name);
}

std::string to_string(LocationFunctional f) {
  return f == LocationFunctional::Multivariate ? "multivariate" : "coordinatewise";
}

double a_psi(const RhoSpec& rho, int d) {
  rho.validate();
  RadialQuadratureOptions opts;
  opts.breakpoints = {truncation_squared(rho)};
  const double dd = static_cast<double>(d);
  const double value = radial_expectation(
      [&](double u) {
        const RhoValue v = rho_of_squared(rho, u);
        return (2.0 / dd) * v.psi_prime * u + v.psi;
      },
      d, opts);
  if (!(value > 0.0)) throw NumericalError("a_psi: nonpositive constant, rho is miscalibrated");
  return value;
}

// ---------------------------------------------------------------------------

InfluenceContext::InfluenceContext(EllipticalModel model, RhoSpec rho, InfluenceKind kind, MonteCarloOptions mc,
                                   LocationFunctional functional)
    : model_(std::move(model)), rho_(rho), kind_(kind), mc_(mc), functional_(functional),
      lazy_(std::make_shared<Lazy>()) {
  model_.validate();
  rho_.validate();
  if (mc_.n_draws < 2) throw std::invalid_argument("influence: need at least two Monte Carlo draws");
  if (mc_.batch < 1) throw std::invalid_argument("influence: batch must be positive");
  a_psi_ = opl::a_psi(rho_, functional_ == LocationFunctional::Multivariate ? dim() : 1);
  precision_ = MahalanobisMetric(model_.sigma0).inverse();
  scales_ = model_.sigma0.diagonal().cwiseSqrt();
}

const InfluenceContext::Cache& InfluenceContext::cache() const {
  std::call_once(lazy_->once, [&] {
    Cache& c = lazy_->cache;
    const EllipticalSampler sampler(model_);
    c.r = sampler.draw_rows(mc_.n_draws, substream_seed(mc_.seed, Stream::MonteCarlo, 0));
    c.r.rowwise() -= model_.mu0.transpose();
    if (functional_ == LocationFunctional::Multivariate) {
      c.pr = c.r * precision_;
      c.q = (c.pr.array() * c.r.array()).rowwise().sum();
    }
  });
  return lazy_->cache;
}

const Matrix& InfluenceContext::residuals() const { return cache().r; }

GResult InfluenceContext::ficm_sum(const Vector& z, int draws) const {
  const int d = dim();
  if (z.size() != d) throw std::invalid_argument("influence: z has the wrong dimension");
  const Cache& c = cache();
  const int n = draws > 0 ? std::min(draws, static_cast<int>(c.r.rows())) : static_cast<int>(c.r.rows());
  const Vector a = z - model_.mu0;

  // Coordinatewise: the replaced coordinate contributes a constant, the others
  // their own clean term.
  Vector fixed = Vector::Zero(d);
  if (functional_ == LocationFunctional::Coordinatewise) {
    for (int j = 0; j < d; ++j) {
      const double s = a[j] / scales_[j];
      fixed[j] = rho_of_squared(rho_, s * s).psi * a[j];
    }
  }

  const int batch = mc_.batch;
  const int n_batches = (n + batch - 1) / batch;
  std::vector<Vector> sums(static_cast<std::size_t>(n_batches));
  std::vector<Vector> squares(static_cast<std::size_t>(n_batches));
  parallel_for(static_cast<std::size_t>(n_batches), mc_.threads, [&](std::size_t b) {
    Vector sum = Vector::Zero(d);
    Vector sq = Vector::Zero(d);
    Vector v(d);
    const int begin = static_cast<int>(b) * batch;
    const int end = std::min(n, begin + batch);
    for (int i = begin; i < end; ++i) {
      if (functional_ == LocationFunctional::Multivariate) {
        double psi_total = 0.0;
        for (int k = 0; k < d; ++k) {
          const double delta = a[k] - c.r(i, k);
          const double q = c.q[i] + 2.0 * delta * c.pr(i, k) + delta * delta * precision_(k, k);
          const double psi = rho_of_squared(rho_, std::max(q, 0.0)).psi;
          psi_total += psi;
          v[k] = psi * delta;
        }
        v += psi_total * c.r.row(i).transpose();
      } else {
        for (int j = 0; j < d; ++j) {
          const double s = c.r(i, j) / scales_[j];
          v[j] = fixed[j] + (d - 1) * rho_of_squared(rho_, s * s).psi * c.r(i, j);
        }
      }
      sum += v;
      sq += v.cwiseProduct(v);
    }
    sums[b] = std::move(sum);
    squares[b] = std::move(sq);
  });

  Vector sum = Vector::Zero(d);
  Vector sq = Vector::Zero(d);
  for (int b = 0; b < n_batches; ++b) {
    sum += sums[static_cast<std::size_t>(b)];
    sq += squares[static_cast<std::size_t>(b)];
  }
  GResult out;
  out.value = sum / n;
  const Vector var = (sq / n - out.value.cwiseProduct(out.value)).cwiseMax(0.0) * (n / (n - 1.0));
  out.se = (var / n).cwiseSqrt();
  return out;
}

// ---------------------------------------------------------------------------

GResult g_function(const std::function<Vector(Engine&)>& sampler, const Vector& m, const Matrix& sigma,
                   const RhoSpec& rho, const MonteCarloOptions& mc) {
  const MahalanobisMetric metric(sigma);
  const int d = static_cast<int>(m.size());
  const int n = mc.n_draws;
  const int n_batches = (n + mc.batch - 1) / mc.batch;
  std::vector<Vector> sums(static_cast<std::size_t>(n_batches));
  std::vector<Vector> squares(static_cast<std::size_t>(n_batches));
  parallel_for(static_cast<std::size_t>(n_batches), mc.threads, [&](std::size_t b) {
    Engine eng = substream(mc.seed, Stream::MonteCarlo, b, 1);
    Vector sum = Vector::Zero(d);
    Vector sq = Vector::Zero(d);
    const int begin = static_cast<int>(b) * mc.batch;
    const int end = std::min(n, begin + mc.batch);
    for (int i = begin; i < end; ++i) {
      const Vector x = sampler(eng);
      const Vector v = rho_of_squared(rho, metric.squared(x, m)).psi * (x - m);
      sum += v;
      sq += v.cwiseProduct(v);
    }
    sums[b] = std::move(sum);
    squares[b] = std::move(sq);
  });
  Vector sum = Vector::Zero(d);
  Vector sq = Vector::Zero(d);
  for (int b = 0; b < n_batches; ++b) {
    sum += sums[static_cast<std::size_t>(b)];
    sq += squares[static_cast<std::size_t>(b)];
  }
  GResult out;
  out.value = sum / n;
  const Vector var = (sq / n - out.value.cwiseProduct(out.value)).cwiseMax(0.0) * (n / (n - 1.0));
  out.se = (var / n).cwiseSqrt();
  return out;
}

GResult g_point_mass(const Vector& z, const Vector& m, const Matrix& sigma, const RhoSpec& rho) {
  return {rho_of_squared(rho, mahalanobis_sq(z, m, sigma)).psi * (z - m), Vector::Zero(z.size())};
}

InfluenceResult if_fdcm(const Vector& z, const InfluenceContext& ctx) {
  const int d = ctx.dim();
  if (z.size() != d) throw std::invalid_argument("influence: z has the wrong dimension");
  InfluenceResult out{z, Vector(d), Vector::Zero(d)};
  const EllipticalModel& model = ctx.model();
  if (ctx.functional() == LocationFunctional::Multivariate) {
    out.value = g_point_mass(z, model.mu0, model.sigma0, ctx.rho()).value / ctx.a_psi();
  } else {
    for (int j = 0; j < d; ++j) {
      const double a = z[j] - model.mu0[j];
      const double s = a / std::sqrt(model.sigma0(j, j));
      out.value[j] = rho_of_squared(ctx.rho(), s * s).psi * a / ctx.a_psi();
    }
  }
  return out;
}

namespace {

InfluenceResult ficm_with_draws(const Vector& z, const InfluenceContext& ctx, int draws) {
  const GResult g = ctx.ficm_sum(z, draws);
  return {z, g.value / ctx.a_psi(), g.se / ctx.a_psi()};
}

InfluenceResult influence_with_draws(const Vector& z, const InfluenceContext& ctx, int draws) {
  switch (ctx.kind()) {
    case InfluenceKind::FDCM: return if_fdcm(z, ctx);
    case InfluenceKind::FICM:
    case InfluenceKind::PCICM: return ficm_with_draws(z, ctx, draws);
    case InfluenceKind::PSICM: {
      InfluenceResult out = ficm_with_draws(z, ctx, draws);
      out.value = 0.5 * (out.value + if_fdcm(z, ctx).value);
      out.se *= 0.5;
      return out;
    }
  }
  throw std::logic_error("influence: unknown kind");
}

}  // namespace

InfluenceResult if_ficm(const Vector& z, const InfluenceContext& ctx) { return ficm_with_draws(z, ctx, 0); }

InfluenceResult if_psicm(const Vector& z, const InfluenceContext& ctx) {
  InfluenceResult out = if_ficm(z, ctx);
  out.value = 0.5 * (out.value + if_fdcm(z, ctx).value);
  out.se *= 0.5;
  return out;
}

InfluenceResult if_pcicm(const Vector& z, const InfluenceContext& ctx) { return if_ficm(z, ctx); }

InfluenceResult influence(const Vector& z, const InfluenceContext& ctx) { return influence_with_draws(z, ctx, 0); }

// ---------------------------------------------------------------------------

std::string to_string(NumericEstimator e) {
  switch (e) {
    case NumericEstimator::MFixedScatter: return "m";
    case NumericEstimator::CoordinatewiseM: return "coord-m";
    case NumericEstimator::S: return "s";
  }
  return "?";
}

namespace {

// Value at 0 of the polynomial through (x_i, y_i) (Neville).
Vector neville_at_zero(const std::vector<double>& x, std::vector<Vector> y) {
  const std::size_t n = x.size();
  for (std::size_t m = 1; m < n; ++m) {
    for (std::size_t i = 0; i + m < n; ++i) {
      y[i] = (x[i + m] * y[i] - x[i] * y[i + 1]) / (x[i + m] - x[i]);
    }
  }
  return y[0];
}

std::vector<std::vector<int>> influence_subsets(int d) {
  std::vector<std::vector<int>> subsets;
  if (d <= 6) {
    for (int mask = 1; mask < (1 << d); ++mask) {
      std::vector<int> s;
      for (int k = 0; k < d; ++k)
        if (mask & (1 << k)) s.push_back(k);
      subsets.push_back(std::move(s));
    }
    return subsets;
  }
  for (int k = 0; k < d; ++k) subsets.push_back({k});
  for (int k = 0; k < d; ++k)
    for (int l = k + 1; l < d; ++l) subsets.push_back({k, l});
  std::vector<int> all(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) all[static_cast<std::size_t>(k)] = k;
  subsets.push_back(std::move(all));
  return subsets;
}

}  // namespace

InfluenceResult if_numeric(const Vector& z, const InfluenceContext& ctx, NumericEstimator estimator,
                           const NumericOptions& opts) {
  const int d = ctx.dim();
  const int n = opts.n_sample;
  if (z.size() != d) throw std::invalid_argument("if_numeric: z has the wrong dimension");
  if (opts.eps_grid.empty()) throw std::invalid_argument("if_numeric: empty eps grid");
  for (double e : opts.eps_grid)
    if (!(e > 0.0 && e <= 0.01)) throw std::invalid_argument("if_numeric: eps grid must lie in (0, 0.01]");
  if (n < 10) throw std::invalid_argument("if_numeric: sample too small");

  const EllipticalModel& model = ctx.model();
  const Matrix Y = EllipticalSampler(model).draw_rows(n, substream_seed(opts.seed, Stream::NumericSample, 0));

  ContaminationSpec spec;
  spec.model = opts.model;
  spec.gamma = opts.gamma;

  // Keep only the blocks that carry mass somewhere on the grid.
  std::vector<std::vector<int>> blocks;
  for (auto& s : influence_subsets(d)) {
    bool used = false;
    for (double e : opts.eps_grid) {
      spec.epsilon = e;
      if (delta_k(spec, d, static_cast<int>(s.size())) > 0.0) used = true;
    }
    if (used) blocks.push_back(std::move(s));
  }
  const int n_blocks = 1 + static_cast<int>(blocks.size());
  Matrix X(static_cast<Eigen::Index>(n) * n_blocks, d);
  X.topRows(n) = Y;
  for (int b = 1; b < n_blocks; ++b) {
    auto rows = X.middleRows(static_cast<Eigen::Index>(b) * n, n);
    rows = Y;
    for (int k : blocks[static_cast<std::size_t>(b - 1)]) rows.col(k).setConstant(z[k]);
  }

  // Mixture weight of each block at eps.
  auto block_weights = [&](double eps) {
    std::vector<double> w(static_cast<std::size_t>(n_blocks));
    spec.epsilon = eps;
    w[0] = delta_k(spec, d, 0);
    for (int b = 1; b < n_blocks; ++b) {
      const int k = static_cast<int>(blocks[static_cast<std::size_t>(b - 1)].size());
      w[static_cast<std::size_t>(b)] = delta_k(spec, d, k) / binomial_coefficient(d, k);
    }
    return w;
  };

  const RhoSpec& rho = ctx.rho();
  const Vector scales = model.sigma0.diagonal().cwiseSqrt();
  auto fit = [&](const std::vector<double>& block_w, const Vector& counts) {
    std::vector<Eigen::Index> keep;
    std::vector<double> w;
    for (int b = 0; b < n_blocks; ++b) {
      if (block_w[static_cast<std::size_t>(b)] == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        if (counts[i] == 0.0) continue;
        keep.push_back(static_cast<Eigen::Index>(b) * n + i);
        w.push_back(block_w[static_cast<std::size_t>(b)] * counts[i]);
      }
    }
    Matrix Xk(static_cast<Eigen::Index>(keep.size()), d);
    for (std::size_t r = 0; r < keep.size(); ++r) Xk.row(static_cast<Eigen::Index>(r)) = X.row(keep[r]);

    MOptions mo;
    mo.start = model.mu0;
    mo.weights = w;
    switch (estimator) {
      case NumericEstimator::MFixedScatter: {
        const Fit f = m_location(Xk, model.sigma0, rho, mo);
        if (!f.est.converged) throw NoConvergence("if_numeric: M-estimator did not converge");
        return f.est.mu;
      }
      case NumericEstimator::CoordinatewiseM:
        return coord_m_location(Xk, scales, rho, mo);
      case NumericEstimator::S: {
        const SFit f = s_refine(Xk, model.mu0, model.sigma0, rho, opts.s_bp, 1000, 1e-12, w);
        if (!f.est.converged) throw NoConvergence("if_numeric: S-estimator did not converge");
        return f.est.mu;
      }
    }
    throw std::logic_error("if_numeric: unknown estimator");
  };

  std::vector<double> base_w(static_cast<std::size_t>(n_blocks), 0.0);
  base_w[0] = 1.0;
  auto extrapolate = [&](const Vector& counts) {
    const Vector t0 = fit(base_w, counts);
    std::vector<Vector> slopes;
    for (double e : opts.eps_grid) slopes.push_back((fit(block_weights(e), counts) - t0) / e);
    return neville_at_zero(opts.eps_grid, std::move(slopes));
  };

  InfluenceResult out{z, extrapolate(Vector::Ones(n)), Vector::Zero(d)};
  if (opts.n_boot > 1) {
    Matrix boot(opts.n_boot, d);
    for (int b = 0; b < opts.n_boot; ++b) {
      Engine eng = substream(opts.seed, Stream::Bootstrap, static_cast<std::uint64_t>(b));
      std::uniform_int_distribution<int> pick(0, n - 1);
      Vector counts = Vector::Zero(n);
      for (int i = 0; i < n; ++i) counts[pick(eng)] += 1.0;
      boot.row(b) = extrapolate(counts).transpose();
    }
    const Vector mean = boot.colwise().mean().transpose();
    out.se = ((boot.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / (opts.n_boot - 1.0))
                 .cwiseSqrt();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(GesNorm norm) { return norm == GesNorm::L2 ? "l2" : "linf"; }

GesNorm parse_ges_norm(const std::string& name) {
  if (name == "l2") return GesNorm::L2;
  if (name == "linf") return GesNorm::LInf;
  throw std::invalid_argument("unknown norm: " + name);
}

double vector_norm(const Vector& v, GesNorm norm) {
  return norm == GesNorm::L2 ? v.norm() : v.cwiseAbs().maxCoeff();
}

namespace {

double norm_se(const InfluenceResult& r, GesNorm norm) {
  if (norm == GesNorm::LInf) {
    Eigen::Index j = 0;
    r.value.cwiseAbs().maxCoeff(&j);
    return r.se[j];
  }
  const double len = r.value.norm();
  if (len == 0.0) return r.se.norm();
  return std::sqrt((r.value.cwiseProduct(r.se) / len).squaredNorm());
}

template <class F>
double golden_max(F&& f, double a, double b, int iters, double* best_x) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a);
  double x2 = a + g * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    }
  }
  *best_x = f1 >= f2 ? x1 : x2;
  return std::max(f1, f2);
}

GesResult ges_fdcm(const InfluenceContext& ctx, const GesSearch& search) {
  const RhoSpec& rho = ctx.rho();
  const double s_max = std::sqrt(truncation_squared(rho));
  auto f = [&](double s) { return rho_of_squared(rho, s * s).psi * s; };
  const int grid = 2000;
  double best_s = 0.0;
  double best = -1.0;
  for (int i = 1; i < grid; ++i) {
    const double s = s_max * i / grid;
    if (f(s) > best) {
      best = f(s);
      best_s = s;
    }
  }
  const double lo = std::max(0.0, best_s - s_max / grid);
  const double hi = std::min(s_max, best_s + s_max / grid);
  best = golden_max(f, lo, hi, 80, &best_s);

  const EllipticalModel& model = ctx.model();
  const int d = ctx.dim();
  GesResult out;
  out.argmax_z = model.mu0;
  const Vector sd = model.sigma0.diagonal().cwiseSqrt();
  if (ctx.functional() == LocationFunctional::Coordinatewise) {
    out.argmax_z += best_s * sd;
    out.value = best / ctx.a_psi() * (search.norm == GesNorm::L2 ? sd.norm() : sd.maxCoeff());
    return out;
  }
  if (search.norm == GesNorm::L2) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.sigma0);
    const double lambda = eig.eigenvalues()[d - 1];
    out.argmax_z += best_s * std::sqrt(lambda) * eig.eigenvectors().col(d - 1);
    out.value = best / ctx.a_psi() * std::sqrt(lambda);
  } else {
    Eigen::Index j = 0;
    sd.maxCoeff(&j);
    out.argmax_z += best_s * model.sigma0.col(j) / sd[j];
    out.value = best / ctx.a_psi() * sd[j];
  }
  return out;
}

}  // namespace

GesResult ges(const InfluenceContext& ctx, const GesSearch& search) {
  if (ctx.kind() == InfluenceKind::FDCM) return ges_fdcm(ctx, search);

  const int d = ctx.dim();
  const EllipticalModel& model = ctx.model();
  std::vector<Vector> directions;
  for (int k = 0; k < d; ++k) {
    Vector e = Vector::Zero(d);
    e[k] = 1.0;
    directions.push_back(e);
    directions.push_back(-e);
  }
  if (d > 1) {
    const Vector diag = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
    directions.push_back(diag);
    directions.push_back(-diag);
    Engine eng = substream(ctx.mc().seed, Stream::Directions, 0);
    std::normal_distribution<double> normal;
    for (int i = 0; i < search.n_random_directions; ++i) {
      Vector v(d);
      for (int k = 0; k < d; ++k) v[k] = normal(eng);
      directions.push_back(v.normalized());
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.sigma0);
  const double spread = std::max(eig.eigenvalues()[d - 1], model.sigma0.diagonal().maxCoeff());
  const double r_max = 1.5 * std::sqrt(static_cast<double>(d) * truncation_squared(ctx.rho()) * spread) + 1.0;
  const double step = r_max / search.radial_points;

  struct Ray {
    double value;
    std::size_t dir;
    int index;
  };
  std::vector<Ray> rays;
  for (std::size_t i = 0; i < directions.size(); ++i) {
    Ray best{-1.0, i, 1};
    for (int j = 1; j <= search.radial_points; ++j) {
      const Vector z = model.mu0 + j * step * directions[i];
      const double v = vector_norm(influence_with_draws(z, ctx, search.search_draws).value, search.norm);
      if (v > best.value) best = {v, i, j};
    }
    rays.push_back(best);
  }
  std::stable_sort(rays.begin(), rays.end(), [](const Ray& a, const Ray& b) { return a.value > b.value; });

  GesResult out;
  out.value = -1.0;
  const int n_refine = std::min<int>(search.refine_rays, static_cast<int>(rays.size()));
  for (int i = 0; i < n_refine; ++i) {
    const Vector& dir = directions[rays[static_cast<std::size_t>(i)].dir];
    const int idx = rays[static_cast<std::size_t>(i)].index;
    auto f = [&](double t) { return vector_norm(influence(Vector(model.mu0 + t * dir), ctx).value, search.norm); };
    double t_best = 0.0;
    const double value = golden_max(f, (idx - 1) * step, (idx + 1) * step, search.golden_iters, &t_best);
    if (value > out.value) {
      out.value = value;
      out.argmax_z = model.mu0 + t_best * dir;
    }
  }
  out.se = norm_se(influence(out.argmax_z, ctx), search.norm);
  return out;
}

}  // namespace opl
