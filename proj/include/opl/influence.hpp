#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "opl/contamination.hpp"
#include "opl/geometry.hpp"
#include "opl/rho.hpp"
#include "opl/types.hpp"

namespace opl {

// Path along which the influence is taken. PCICM shares the FICM influence.
enum class InfluenceKind { FDCM, FICM, PSICM, PCICM };

// Multivariate: one affine-equivariant location functional with loss psi on
// d^2(x, mu, sigma). Coordinatewise: d univariate functionals, column j using
// the same loss on ((x_j - mu_j) / sigma_jj^{1/2})^2.
enum class LocationFunctional { Multivariate, Coordinatewise };

std::string to_string(InfluenceKind kind);
InfluenceKind parse_influence_kind(const std::string& name);
std::string to_string(LocationFunctional f);

struct MonteCarloOptions {
  int n_draws = 200000;
  std::uint64_t seed = 1;
  int batch = 8192;
  unsigned threads = 1;
};

struct InfluenceResult {
  Vector z;
  Vector value;
  Vector se;  // Monte Carlo standard errors, zero on closed-form paths
};

struct GResult {
  Vector value;
  Vector se;
};

// E[(2/d) psi'(u) u + psi(u)] over u ~ chi-square(d), psi from the squared form.
double a_psi(const RhoSpec& rho, int d);

class InfluenceContext {
 public:
  InfluenceContext(EllipticalModel model, RhoSpec rho, InfluenceKind kind, MonteCarloOptions mc = {},
                   LocationFunctional functional = LocationFunctional::Multivariate);

  int dim() const { return model_.dim(); }
  const EllipticalModel& model() const { return model_; }
  const RhoSpec& rho() const { return rho_; }
  InfluenceKind kind() const { return kind_; }
  LocationFunctional functional() const { return functional_; }
  const MonteCarloOptions& mc() const { return mc_; }
  double a_psi() const { return a_psi_; }

  // Cached reference draws from H0, shared by every z (common random numbers).
  const Matrix& residuals() const;

  // Contribution of H({k}, z) summed over k, per reference draw, computed on
  // the first `draws` rows (all rows when draws <= 0).
  GResult ficm_sum(const Vector& z, int draws = 0) const;

 private:
  struct Cache {
    Matrix r;   // n x d residuals y - mu0
    Matrix pr;  // n x d rows of P r (multivariate only)
    Vector q;   // r' P r
  };
  const Cache& cache() const;

  EllipticalModel model_;
  RhoSpec rho_;
  InfluenceKind kind_;
  MonteCarloOptions mc_;
  LocationFunctional functional_;
  double a_psi_ = 0.0;
  Matrix precision_;
  Vector scales_;  // sigma_jj^{1/2}

  // Shared by copies so the draws are built once.
  struct Lazy {
    std::once_flag once;
    Cache cache;
  };
  std::shared_ptr<Lazy> lazy_;
};

// Monte Carlo mean of psi(d^2(X, m, sigma)) (X - m) with X drawn by `sampler`.
GResult g_function(const std::function<Vector(Engine&)>& sampler, const Vector& m, const Matrix& sigma,
                   const RhoSpec& rho, const MonteCarloOptions& mc);
// Point-mass shortcut: exact value, zero stderr.
GResult g_point_mass(const Vector& z, const Vector& m, const Matrix& sigma, const RhoSpec& rho);

InfluenceResult if_fdcm(const Vector& z, const InfluenceContext& ctx);
InfluenceResult if_ficm(const Vector& z, const InfluenceContext& ctx);
InfluenceResult if_psicm(const Vector& z, const InfluenceContext& ctx);
InfluenceResult if_pcicm(const Vector& z, const InfluenceContext& ctx);
// Dispatch on ctx.kind().
InfluenceResult influence(const Vector& z, const InfluenceContext& ctx);

// ---------------------------------------------------------------------------
// Finite-epsilon slope oracle

enum class NumericEstimator {
  MFixedScatter,    // m_location with sigma0 held fixed
  CoordinatewiseM,  // per-column M with scales sigma_jj^{1/2}
  S,                // S-estimator refined from (mu0, sigma0)
};

std::string to_string(NumericEstimator e);

struct NumericOptions {
  ContaminationModel model = ContaminationModel::FDCM;
  double gamma = 0.5;  // PCICM_I
  std::vector<double> eps_grid{0.001, 0.002};
  int n_sample = 100000;
  int n_boot = 20;
  std::uint64_t seed = 1;
  double s_bp = 0.5;  // constraint level for the S path
};

// Slope of mu(H(eps, z)) at eps = 0. H(eps, z) is represented exactly as a
// weighted mixture of H(I, z) blocks built from one base sample of H0, so the
// same draws enter every eps. Richardson extrapolation over eps_grid; the
// bootstrap resamples the base draws through the weights.
InfluenceResult if_numeric(const Vector& z, const InfluenceContext& ctx, NumericEstimator estimator,
                           const NumericOptions& opts = {});

// ---------------------------------------------------------------------------
// Gross-error sensitivity

enum class GesNorm { L2, LInf };

std::string to_string(GesNorm norm);
GesNorm parse_ges_norm(const std::string& name);

struct GesSearch {
  GesNorm norm = GesNorm::L2;
  int n_random_directions = 32;
  int radial_points = 48;
  int search_draws = 20000;  // subsample used while scanning rays
  int refine_rays = 3;       // best rays re-evaluated with all draws
  int golden_iters = 40;
};

struct GesResult {
  double value = 0.0;
  double se = 0.0;
  Vector argmax_z;
};

double vector_norm(const Vector& v, GesNorm norm);

// sup_z |IF(z)| over the search set. FDCM reduces to a one-dimensional
// maximization over the Mahalanobis radius; the other kinds scan rays from mu0
// and refine the best ones.
GesResult ges(const InfluenceContext& ctx, const GesSearch& search = {});

}  // namespace opl
