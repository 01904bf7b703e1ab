#pragma once

#include <span>

#include "opl/rng.hpp"
#include "opl/types.hpp"

namespace opl {

/// Cholesky-backed metric for repeated Mahalanobis evaluations against one
/// scatter matrix. Throws SingularScatter when sigma is not SPD.
class MahalanobisMetric {
 public:
  explicit MahalanobisMetric(const Matrix& sigma);

  int dim() const { return static_cast<int>(lower_.rows()); }
  double squared(const Vector& x, const Vector& m) const;
  /// Squared distances of every row of X from m.
  Vector squared_rows(const Matrix& X, const Vector& m) const;
  double log_det() const { return log_det_; }
  const Matrix& inverse() const;
  const Matrix& lower() const { return lower_; }

 private:
  Matrix lower_;
  double log_det_ = 0.0;
  mutable Matrix inverse_;
};

/// (x - m)' sigma^{-1} (x - m).
double mahalanobis_sq(const Vector& x, const Vector& m, const Matrix& sigma);

/// Column means and the unbiased (n - 1) covariance of the selected rows.
Vector mean_of_rows(const Matrix& X, std::span<const int> rows);
Matrix covariance_of_rows(const Matrix& X, std::span<const int> rows, const Vector& mean);

enum class RadialFamily { Gaussian };

/// Elliptical core model: density h((y - mu0)' sigma0^{-1} (y - mu0)).
struct EllipticalModel {
  Vector mu0;
  Matrix sigma0;
  RadialFamily radial = RadialFamily::Gaussian;

  int dim() const { return static_cast<int>(mu0.size()); }
  void validate() const;
  bool spherical() const;

  static EllipticalModel standard(int d);
  /// Unit variances with common correlation r.
  static EllipticalModel equicorrelated(int d, double r);
};

class EllipticalSampler {
 public:
  explicit EllipticalSampler(const EllipticalModel& model);

  const EllipticalModel& model() const { return model_; }
  Vector draw(Engine& eng) const;
  /// n rows; row i is drawn from its own substream (seed, CleanRows, i).
  Matrix draw_rows(int n, std::uint64_t seed) const;

 private:
  EllipticalModel model_;
  Matrix lower_;
};

}  // namespace opl
