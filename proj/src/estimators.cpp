#include "opl/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "opl/errors.hpp"
#include "opl/geometry.hpp"
#include "opl/parallel.hpp"
#include "opl/radial.hpp"
#include "opl/rng.hpp"

namespace opl {

namespace {

constexpr double kMadConsistency = 0.6744897501960817;

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Vector normalized_weights(std::span<const double> weights, Eigen::Index n) {
  if (weights.empty()) return Vector::Constant(n, 1.0 / static_cast<double>(n));
  if (static_cast<Eigen::Index>(weights.size()) != n) throw std::invalid_argument("weights: length mismatch");
  Vector w = Eigen::Map<const Vector>(weights.data(), n);
  if ((w.array() < 0.0).any()) throw std::invalid_argument("weights must be nonnegative");
  const double total = w.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weights must have a positive sum");
  return w / total;
}

double step_scale(const Matrix& sigma) { return std::sqrt(std::max(sigma.trace() / sigma.rows(), 1e-300)); }

std::vector<int> smallest_indices(const Vector& d2, int h) {
  std::vector<int> idx(static_cast<std::size_t>(d2.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + h, idx.end(), [&](int a, int b) {
    return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
  });
  idx.resize(static_cast<std::size_t>(h));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------

LocationScatter sample_mean(const Matrix& X) {
  if (X.rows() < 1) throw std::invalid_argument("sample_mean: empty data");
  LocationScatter out;
  out.mu = X.colwise().mean().transpose();
  if (X.rows() >= X.cols() + 1) {
    const auto rows = all_rows(X.rows());
    out.sigma = covariance_of_rows(X, rows, out.mu);
    out.objective = out.sigma->determinant();
  }
  return out;
}

Vector coord_median(const Matrix& X) {
  if (X.rows() < 1) throw std::invalid_argument("coord_median: empty data");
  Vector med(X.cols());
  std::vector<double> column(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) column[static_cast<std::size_t>(i)] = X(i, j);
    med[j] = median_inplace(column);
  }
  return med;
}

double mad(std::span<const double> x, double center) {
  std::vector<double> dev(x.size());
  std::transform(x.begin(), x.end(), dev.begin(), [&](double v) { return std::abs(v - center); });
  return median_inplace(dev) / kMadConsistency;
}

double m_scale(std::span<const double> abs_residuals, const RhoSpec& rho, double b,
               std::span<const double> weights) {
  const auto n = static_cast<Eigen::Index>(abs_residuals.size());
  if (n == 0) throw std::invalid_argument("m_scale: no residuals");
  if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("m_scale: b must lie in (0, 1)");
  const Vector w = normalized_weights(weights, n);

  double max_r = 0.0;
  double nonzero_mass = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = std::abs(abs_residuals[static_cast<std::size_t>(i)]);
    max_r = std::max(max_r, r);
    if (r > 0.0) nonzero_mass += w[i];
  }
  if (nonzero_mass <= b) throw DegenerateData("m_scale: too many zero residuals for a positive scale");

  auto mean_rho = [&](double s) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w[i] == 0.0) continue;
      total += w[i] * rho_eval(rho, std::abs(abs_residuals[static_cast<std::size_t>(i)]) / s).rho;
    }
    return total;
  };

  // At hi every standardized residual is at most rho^{-1}(b).
  double hi = max_r / rho_inverse(rho, b);
  double lo = hi;
  while (mean_rho(lo) <= b) lo *= 0.5;
  for (int iter = 0; iter < 200 && hi / lo - 1.0 > 1e-15; ++iter) {
    const double mid = std::sqrt(lo * hi);
    (mean_rho(mid) > b ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

UnivariateS univariate_s(std::span<const double> x, const RhoSpec& rho, double b) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("univariate_s: empty column");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t run = 1;
  std::size_t longest = 1;
  for (std::size_t i = 1; i < n; ++i) {
    run = sorted[i] == sorted[i - 1] ? run + 1 : 1;
    longest = std::max(longest, run);
  }
  if (2 * longest >= n && n > 1) throw DegenerateData("univariate_s: at least half of the values are tied");
  if (n == 1) throw DegenerateData("univariate_s: a single value has no scale");

  UnivariateS out;
  out.mu = median_inplace(sorted);
  std::vector<double> r(n);
  for (int iter = 0; iter < 1000; ++iter) {
    for (std::size_t i = 0; i < n; ++i) r[i] = std::abs(x[i] - out.mu);
    const double s = m_scale(r, rho, b);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = u_weight(rho, r[i] / s);
      num += u * x[i];
      den += u;
    }
    if (!(den > 0.0)) throw AllPointsRejected();
    const double next = num / den;
    const double step = std::abs(next - out.mu);
    out.mu = next;
    out.iterations = iter + 1;
    if (step <= 1e-14 * s) {
      out.converged = true;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) r[i] = std::abs(x[i] - out.mu);
  out.scale = m_scale(r, rho, b);
  return out;
}

CoordinatewiseS coord_s(const Matrix& X, const RhoSpec& rho1d, double bp) {
  if (rho1d.convention != ArgumentConvention::ScaledDistance)
    throw std::invalid_argument("coord_s: rho must use the scaled-distance convention");
  CoordinatewiseS out{Vector(X.cols()), Vector(X.cols())};
  std::vector<double> column(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) column[static_cast<std::size_t>(i)] = X(i, j);
    const UnivariateS fit = univariate_s(column, rho1d, bp);
    out.mu[j] = fit.mu;
    out.scale[j] = fit.scale;
  }
  return out;
}

CoordinatewiseS coord_s(const Matrix& X, double bp) {
  return coord_s(X, RhoSpec::tukey(calibrate_c(1, bp, ArgumentConvention::ScaledDistance),
                                   ArgumentConvention::ScaledDistance),
                 bp);
}

// ---------------------------------------------------------------------------

double m_equation_residual(const Matrix& X, const Vector& m, const Matrix& sigma, const RhoSpec& rho,
                           std::span<const double> weights) {
  const Vector w = normalized_weights(weights, X.rows());
  const MahalanobisMetric metric(sigma);
  const Vector d2 = metric.squared_rows(X, m);
  Vector total = Vector::Zero(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (w[i] == 0.0) continue;
    total += w[i] * rho_of_squared(rho, d2[i]).psi * (X.row(i).transpose() - m);
  }
  return total.norm();
}

Fit m_location(const Matrix& X, const Matrix& sigma, const RhoSpec& rho, const MOptions& opts) {
  rho.validate();
  if (X.rows() < 1) throw std::invalid_argument("m_location: empty data");
  if (sigma.rows() != X.cols()) throw std::invalid_argument("m_location: scatter dimension mismatch");
  const Vector base = normalized_weights(opts.weights, X.rows());
  const MahalanobisMetric metric(sigma);
  const double scale = step_scale(sigma);

  Vector mu = opts.start ? *opts.start : coord_median(X);
  Vector w(X.rows());
  Fit out;
  out.est.converged = false;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vector d2 = metric.squared_rows(X, mu);
    for (Eigen::Index i = 0; i < X.rows(); ++i) w[i] = base[i] == 0.0 ? 0.0 : base[i] * rho_of_squared(rho, d2[i]).psi;
    const double total = w.sum();
    if (!(total > 0.0)) throw AllPointsRejected();
    const Vector next = X.transpose() * w / total;
    const double step = (next - mu).norm();
    mu = next;
    out.est.iterations = iter + 1;
    if (step <= opts.tol * scale) break;
  }
  const Vector d2 = metric.squared_rows(X, mu);
  for (Eigen::Index i = 0; i < X.rows(); ++i) w[i] = base[i] == 0.0 ? 0.0 : base[i] * rho_of_squared(rho, d2[i]).psi;
  const double total = w.sum();
  if (!(total > 0.0)) throw AllPointsRejected();

  out.est.mu = mu;
  out.est.sigma = sigma;
  out.w.weights = w / total;
  out.est.objective = m_equation_residual(X, mu, sigma, rho, opts.weights);
  out.est.converged = out.est.objective < 1e-9;
  return out;
}

Vector coord_m_location(const Matrix& X, const Vector& scales, const RhoSpec& rho, const MOptions& opts) {
  rho.validate();
  if (scales.size() != X.cols()) throw std::invalid_argument("coord_m_location: scale dimension mismatch");
  const Vector base = normalized_weights(opts.weights, X.rows());
  Vector mu = opts.start ? *opts.start : coord_median(X);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double s = scales[j];
    if (!(s > 0.0)) throw std::invalid_argument("coord_m_location: scales must be positive");
    double m = mu[j];
    for (int iter = 0; iter < opts.max_iter; ++iter) {
      double num = 0.0;
      double den = 0.0;
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (base[i] == 0.0) continue;
        const double r = (X(i, j) - m) / s;
        const double w = base[i] * rho_of_squared(rho, r * r).psi;
        num += w * X(i, j);
        den += w;
      }
      if (!(den > 0.0)) throw AllPointsRejected();
      const double next = num / den;
      const double step = std::abs(next - m);
      m = next;
      if (step <= opts.tol * s) break;
    }
    mu[j] = m;
  }
  return mu;
}

// ---------------------------------------------------------------------------

double s_constraint_residual(const Matrix& X, const Vector& mu, const Matrix& sigma, const RhoSpec& rho,
                             double b) {
  const Vector d2 = MahalanobisMetric(sigma).squared_rows(X, mu);
  double total = 0.0;
  for (Eigen::Index i = 0; i < d2.size(); ++i) total += rho_eval(rho, std::sqrt(d2[i])).rho;
  return std::abs(total / static_cast<double>(d2.size()) - b);
}

SFit s_refine(const Matrix& X, const Vector& mu0, const Matrix& sigma0, const RhoSpec& rho, double b,
              int max_iter, double tol, std::span<const double> weights) {
  rho.validate();
  if (rho.convention != ArgumentConvention::ScaledDistance)
    throw std::invalid_argument("s_refine: rho must use the scaled-distance convention");
  const auto n = X.rows();
  const auto d = static_cast<double>(X.cols());
  const Vector base = normalized_weights(weights, n);
  std::vector<double> base_vec(base.data(), base.data() + n);

  Vector mu = mu0;
  Matrix shape = sigma0 / std::exp(MahalanobisMetric(sigma0).log_det() / d);
  std::vector<double> dist(static_cast<std::size_t>(n));
  Vector u(n);

  SFit out;
  out.rho = rho;
  out.b = b;
  out.est.converged = false;
  double previous_scale = std::numeric_limits<double>::infinity();

  auto distances = [&](const MahalanobisMetric& metric) {
    const Vector d2 = metric.squared_rows(X, mu);
    for (Eigen::Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = std::sqrt(d2[i]);
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    const MahalanobisMetric metric(shape);
    distances(metric);
    const double s = m_scale(dist, rho, b, base_vec);
    if (s > previous_scale * (1.0 + 1e-12)) out.det_nonincreasing = false;
    previous_scale = s;

    for (Eigen::Index i = 0; i < n; ++i) u[i] = base[i] * u_weight(rho, dist[static_cast<std::size_t>(i)] / s);
    const double total = u.sum();
    if (!(total > 0.0)) throw AllPointsRejected();
    const Vector next_mu = X.transpose() * u / total;
    const Matrix centered = X.rowwise() - next_mu.transpose();
    Matrix cov = centered.transpose() * u.asDiagonal() * centered / total;
    const MahalanobisMetric cov_metric(cov);
    const Matrix next_shape = cov / std::exp(cov_metric.log_det() / d);

    const double change = std::sqrt(metric.squared(next_mu, mu)) / s +
                          (next_shape - shape).norm() / shape.norm();
    mu = next_mu;
    shape = next_shape;
    out.est.iterations = iter + 1;
    if (change < tol) {
      out.est.converged = true;
      break;
    }
  }

  const MahalanobisMetric metric(shape);
  distances(metric);
  const double s = m_scale(dist, rho, b, base_vec);
  if (s > previous_scale * (1.0 + 1e-12)) out.det_nonincreasing = false;
  for (Eigen::Index i = 0; i < n; ++i) u[i] = base[i] * u_weight(rho, dist[static_cast<std::size_t>(i)] / s);
  const double total = u.sum();
  if (!(total > 0.0)) throw AllPointsRejected();

  out.scale = s;
  out.est.mu = mu;
  out.est.sigma = s * s * shape;
  out.est.objective = std::exp(2.0 * d * std::log(s) + metric.log_det());
  out.w.weights = u / total;
  return out;
}

SFit s_estimate(const Matrix& X, const SOptions& opts) {
  const auto n = static_cast<int>(X.rows());
  const auto d = static_cast<int>(X.cols());
  if (n < d + 1) throw DegenerateData("s_estimate: need at least d + 1 observations");
  const RhoSpec rho = opts.rho ? *opts.rho
                               : RhoSpec::tukey(calibrate_c(d, opts.bp, ArgumentConvention::ScaledDistance),
                                                ArgumentConvention::ScaledDistance);
  struct Candidate {
    Vector mu;
    Matrix sigma;
  };
  std::vector<Candidate> candidates;
  try {
    McdOptions mo;
    mo.n_starts = opts.mcd_starts;
    mo.seed = opts.seed;
    const McdFit init = mcd(X, mo);
    candidates.push_back({init.est.mu, *init.est.sigma});
  } catch (const NumericalError&) {
    const Vector med = coord_median(X);
    Vector diag(d);
    std::vector<double> column(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = X(i, j);
      const double m = mad(column, med[j]);
      diag[j] = m * m;
    }
    if ((diag.array() > 0.0).all()) candidates.push_back({med, diag.asDiagonal()});
  }
  for (int s = 0; s < opts.n_starts; ++s) {
    Engine eng = substream(opts.seed, Stream::ElementalStarts, static_cast<std::uint64_t>(s), 2);
    const auto idx = sample_without_replacement(n, d + 1, eng);
    const Vector m = mean_of_rows(X, idx);
    candidates.push_back({m, covariance_of_rows(X, idx, m)});
  }

  std::optional<SFit> best;
  for (const auto& cand : candidates) {
    try {
      SFit fit = s_refine(X, cand.mu, cand.sigma, rho, opts.bp, opts.max_iter, opts.tol);
      if (!best || fit.scale < best->scale) best = std::move(fit);
    } catch (const NumericalError&) {
      continue;
    }
  }
  if (!best) throw DegenerateData("s_estimate: fewer than d + 1 points in general position");
  return *best;
}

// ---------------------------------------------------------------------------

int default_mcd_h(int n, int d) { return (n + d + 1) / 2; }

namespace {

struct StartOutcome {
  bool ok = false;
  double log_det = std::numeric_limits<double>::infinity();
  std::vector<int> subset;
  Vector mu;
  Matrix cov;
  std::vector<double> trace;
  bool monotone = true;
  int restarts = 0;
  int steps = 0;
};

StartOutcome run_mcd_start(const Matrix& X, int h, const McdOptions& opts, std::uint64_t start) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  StartOutcome out;
  Engine eng = substream(opts.seed, Stream::ElementalStarts, start);

  std::optional<MahalanobisMetric> metric;
  Vector mu;
  for (int attempt = 0; attempt < 100 && !metric; ++attempt) {
    const auto idx = sample_without_replacement(n, d + 1, eng);
    mu = mean_of_rows(X, idx);
    try {
      metric.emplace(covariance_of_rows(X, idx, mu));
    } catch (const SingularScatter&) {
      ++out.restarts;
    }
  }
  if (!metric) return out;

  std::vector<int> subset = smallest_indices(metric->squared_rows(X, mu), h);
  for (int step = 0; step < opts.max_csteps; ++step) {
    mu = mean_of_rows(X, subset);
    Matrix cov = covariance_of_rows(X, subset, mu);
    try {
      metric.emplace(cov);
    } catch (const SingularScatter&) {
      ++out.restarts;
      return out;
    }
    const double log_det = metric->log_det();
    if (!out.trace.empty() && log_det > out.trace.back() + 1e-10 * std::max(1.0, std::abs(out.trace.back())))
      out.monotone = false;
    out.trace.push_back(log_det);
    out.steps = step + 1;
    out.ok = true;
    out.log_det = log_det;
    out.mu = mu;
    out.cov = std::move(cov);
    out.subset = subset;

    std::vector<int> next = smallest_indices(metric->squared_rows(X, mu), h);
    if (next == subset) break;
    subset = std::move(next);
  }
  return out;
}

}  // namespace

McdFit mcd(const Matrix& X, const McdOptions& opts) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const int h = opts.h > 0 ? opts.h : default_mcd_h(n, d);
  if (h < d + 1 || h > n) throw std::invalid_argument("mcd: need d + 1 <= h <= n");
  if (opts.n_starts < 1) throw std::invalid_argument("mcd: need at least one start");

  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(opts.n_starts));
  parallel_for(outcomes.size(), opts.threads,
               [&](std::size_t s) { outcomes[s] = run_mcd_start(X, h, opts, s); });

  McdFit fit;
  fit.h = h;
  const StartOutcome* best = nullptr;
  for (const auto& o : outcomes) {
    fit.singular_restarts += o.restarts;
    if (!o.monotone) fit.csteps_monotone = false;
    if (o.ok && (!best || o.log_det < best->log_det)) best = &o;
  }
  if (!best) throw SingularScatter("mcd: every elemental start produced a singular subset");

  fit.est.mu = best->mu;
  fit.est.sigma = best->cov;
  fit.est.objective = std::exp(best->log_det);
  fit.est.iterations = best->steps;
  fit.est.converged = true;
  fit.subset = best->subset;
  fit.log_det_trace = best->trace;
  fit.w.weights = Vector::Zero(n);
  for (int i : fit.subset) fit.w.weights[i] = 1.0 / h;
  return fit;
}

// ---------------------------------------------------------------------------

int default_mve_coverage(int n, int d) { return (n + d + 2) / 2; }

double covering_log_volume(const Matrix& X, const Vector& m, const Matrix& S, int coverage, double* radius_sq) {
  const MahalanobisMetric metric(S);
  Vector d2 = metric.squared_rows(X, m);
  std::nth_element(d2.data(), d2.data() + (coverage - 1), d2.data() + d2.size());
  const double r2 = d2[coverage - 1];
  if (radius_sq) *radius_sq = r2;
  if (!(r2 > 0.0)) return -std::numeric_limits<double>::infinity();
  return 0.5 * metric.log_det() + 0.5 * static_cast<double>(X.cols()) * std::log(r2);
}

MveFit mve(const Matrix& X, const MveOptions& opts) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n < d + 1) throw DegenerateData("mve: need at least d + 1 observations");
  const int q = default_mve_coverage(n, d);

  MveFit fit;
  fit.coverage = q;
  bool found = false;
  Vector best_mu;
  Matrix best_shape;
  double best_r2 = 0.0;
  fit.log_volume = std::numeric_limits<double>::infinity();

  auto consider = [&](const Vector& m, const Matrix& S) {
    double r2 = 0.0;
    double log_volume = 0.0;
    try {
      log_volume = covering_log_volume(X, m, S, q, &r2);
    } catch (const SingularScatter&) {
      ++fit.degenerate_trials;
      return;
    }
    if (!std::isfinite(log_volume)) {
      ++fit.degenerate_trials;
      return;
    }
    if (log_volume < fit.log_volume) {
      fit.log_volume = log_volume;
      best_mu = m;
      best_shape = S;
      best_r2 = r2;
      found = true;
    }
  };

  const auto rows = all_rows(n);
  const Vector mean = mean_of_rows(X, rows);
  consider(mean, covariance_of_rows(X, rows, mean));
  for (int trial = 0; trial < opts.n_trials; ++trial) {
    Engine eng = substream(opts.seed, Stream::ElementalStarts, static_cast<std::uint64_t>(trial), 1);
    const auto idx = sample_without_replacement(n, d + 1, eng);
    const Vector m = mean_of_rows(X, idx);
    consider(m, covariance_of_rows(X, idx, m));
  }
  if (!found) throw DegenerateData("mve: every elemental subset was degenerate");

  fit.est.mu = best_mu;
  fit.est.sigma = best_shape * best_r2;
  fit.est.objective = std::exp(2.0 * fit.log_volume);
  fit.est.iterations = opts.n_trials;
  return fit;
}

double max_abs_component(const Vector& mu) { return mu.cwiseAbs().maxCoeff(); }

}  // namespace opl
