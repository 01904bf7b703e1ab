#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opl/rho.hpp"
#include "opl/types.hpp"

namespace opl {

/// A location/scatter estimate with convergence diagnostics. `objective` is
/// estimator specific (det of the scatter for S, MCD and MVE).
struct LocationScatter {
  Vector mu;
  std::optional<Matrix> sigma;
  bool converged = true;
  int iterations = 0;
  double objective = 0.0;
};

/// Observation weights of a weighted-mean representation mu = sum_i w_i x_i.
/// Weights are nonnegative and sum to 1.
struct WeightProfile {
  Vector weights;
};

struct Fit {
  LocationScatter est;
  WeightProfile w;
};

// ---------------------------------------------------------------------------
// Classical and coordinatewise estimators

/// Column means; sigma is the unbiased covariance when n >= d + 1.
LocationScatter sample_mean(const Matrix& X);

/// Per-column median (midpoint of the central order statistics for even n).
Vector coord_median(const Matrix& X);

/// Median absolute deviation scaled for consistency at the normal.
double mad(std::span<const double> x, double center);

/// Solves sum_i w_i rho(r_i / s) = b for the scale s (M-scale). `rho` must
/// use the scaled-distance convention. Uniform weights when `weights` is empty.
/// Throws DegenerateData when too many residuals are zero for a positive root.
double m_scale(std::span<const double> abs_residuals, const RhoSpec& rho, double b,
               std::span<const double> weights = {});

struct UnivariateS {
  double mu = 0.0;
  double scale = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Univariate S-estimator of location and scale (IRLS from median/MAD).
/// Throws DegenerateData when at least half of the values are tied.
UnivariateS univariate_s(std::span<const double> x, const RhoSpec& rho, double b);

struct CoordinatewiseS {
  Vector mu;
  Vector scale;
};

/// Per-column univariate S-estimates. With the default overload the tuning
/// constant is calibrate_c(1, bp) and the constraint level is bp.
CoordinatewiseS coord_s(const Matrix& X, const RhoSpec& rho1d, double bp);
CoordinatewiseS coord_s(const Matrix& X, double bp = 0.5);

// ---------------------------------------------------------------------------
// M-estimation of location with a given scatter

struct MOptions {
  int max_iter = 500;
  double tol = 1e-13;
  std::optional<Vector> start;       // defaults to coord_median
  std::span<const double> weights;   // observation weights; uniform if empty
};

/// Fixed point of m <- sum w_i psi(d_i^2) x_i / sum w_i psi(d_i^2), the IRLS
/// form of E[psi(d^2(X, m, sigma)) (X - m)] = 0. psi is taken from the squared
/// form of `rho`. Non-convergence is reported through est.converged.
/// Throws AllPointsRejected when every observation lies beyond truncation.
Fit m_location(const Matrix& X, const Matrix& sigma, const RhoSpec& rho, const MOptions& opts = {});

/// Norm of the weighted first-order condition at m.
double m_equation_residual(const Matrix& X, const Vector& m, const Matrix& sigma, const RhoSpec& rho,
                           std::span<const double> weights = {});

/// Coordinatewise M-location: column j solves the univariate first-order
/// condition with standardized residuals (x - m_j) / scales_j.
Vector coord_m_location(const Matrix& X, const Vector& scales, const RhoSpec& rho,
                        const MOptions& opts = {});

// ---------------------------------------------------------------------------
// S-estimation

struct SOptions {
  double bp = 0.5;
  std::optional<RhoSpec> rho;  // scaled-distance; default c = calibrate_c(d, bp)
  int n_starts = 20;           // elemental (d+1)-subset starts
  int mcd_starts = 50;         // starts of the MCD initial candidate
  int max_iter = 200;
  double tol = 1e-10;
  std::uint64_t seed = 1;
};

struct SFit {
  LocationScatter est;
  WeightProfile w;
  double scale = 0.0;               // M-scale of the det-one shape at the optimum
  bool det_nonincreasing = true;    // over the IRLS iterations of the winning start
  RhoSpec rho;
  double b = 0.5;
};

/// Multivariate S-estimator: local minimizer of det(sigma) subject to
/// mean rho(d(x, mu, sigma)) = b, found by iterative reweighting from several
/// starts. On exit mu = sum w_i x_i with w_i proportional to u(d_i).
SFit s_estimate(const Matrix& X, const SOptions& opts = {});

/// IRLS refinement of an S-estimate from (mu, sigma), optionally weighted.
SFit s_refine(const Matrix& X, const Vector& mu, const Matrix& sigma, const RhoSpec& rho, double b,
              int max_iter, double tol, std::span<const double> weights = {});

/// |mean rho(d(x_i, mu, sigma)) - b| at an estimate.
double s_constraint_residual(const Matrix& X, const Vector& mu, const Matrix& sigma, const RhoSpec& rho,
                             double b);

// ---------------------------------------------------------------------------
// Minimum covariance determinant

struct McdOptions {
  int h = 0;                 // 0 -> floor((n + d + 1) / 2)
  int n_starts = 500;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int max_csteps = 1000;
};

struct McdFit {
  LocationScatter est;
  std::vector<int> subset;        // sorted row indices
  WeightProfile w;                // 1/h on the subset, 0 elsewhere
  int h = 0;
  bool csteps_monotone = true;    // over every start
  std::vector<double> log_det_trace;  // C-step trace of the winning start
  int singular_restarts = 0;
};

int default_mcd_h(int n, int d);

/// Concentration-step MCD from elemental starts; keeps the start with the
/// smallest determinant (ties broken by start index). Rows with equal
/// distances are ordered by index when selecting subsets.
McdFit mcd(const Matrix& X, const McdOptions& opts = {});

// ---------------------------------------------------------------------------
// Minimum volume ellipsoid

struct MveOptions {
  int n_trials = 3000;
  std::uint64_t seed = 1;
};

struct MveFit {
  LocationScatter est;   // sigma is the covering ellipsoid's shape
  double log_volume = 0.0;
  int coverage = 0;
  int degenerate_trials = 0;
};

int default_mve_coverage(int n, int d);

/// Log volume (up to the unit-ball constant) of the ellipsoid centred at m
/// with shape S inflated to cover `coverage` rows of X.
double covering_log_volume(const Matrix& X, const Vector& m, const Matrix& S, int coverage,
                           double* radius_sq = nullptr);

/// Elemental-subset MVE. The classical mean/covariance ellipsoid is always
/// included as a candidate, so the result never has a larger covering volume.
MveFit mve(const Matrix& X, const MveOptions& opts = {});

// ---------------------------------------------------------------------------

/// Largest absolute component of a location estimate (true location 0).
double max_abs_component(const Vector& mu);

}  // namespace opl
