#include "opl/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "opl/errors.hpp"

namespace opl {

MahalanobisMetric::MahalanobisMetric(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw SingularScatter("scatter matrix must be square and nonempty");
  if (!sigma.allFinite()) throw SingularScatter("scatter matrix has nonfinite entries");
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) throw SingularScatter("scatter matrix is not symmetric");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw SingularScatter();
  lower_ = llt.matrixL();
  const Vector diag = lower_.diagonal();
  if ((diag.array() <= 0.0).any() || diag.minCoeff() <= 1e-150) throw SingularScatter();
  // Reject numerically rank-deficient matrices that slip through LLT.
  if (diag.minCoeff() / diag.maxCoeff() < 1e-12) throw SingularScatter("scatter matrix is numerically singular");
  log_det_ = 2.0 * diag.array().log().sum();
}

double MahalanobisMetric::squared(const Vector& x, const Vector& m) const {
  const Vector w = lower_.triangularView<Eigen::Lower>().solve(x - m);
  return w.squaredNorm();
}

Vector MahalanobisMetric::squared_rows(const Matrix& X, const Vector& m) const {
  Matrix centered = (X.rowwise() - m.transpose()).transpose();
  lower_.triangularView<Eigen::Lower>().solveInPlace(centered);
  return centered.colwise().squaredNorm().transpose();
}

const Matrix& MahalanobisMetric::inverse() const {
  if (inverse_.size() == 0) {
    const int d = dim();
    Matrix linv = lower_.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
    inverse_ = linv.transpose() * linv;
  }
  return inverse_;
}

double mahalanobis_sq(const Vector& x, const Vector& m, const Matrix& sigma) {
  return MahalanobisMetric(sigma).squared(x, m);
}

Vector mean_of_rows(const Matrix& X, std::span<const int> rows) {
  Vector mean = Vector::Zero(X.cols());
  for (int i : rows) mean += X.row(i).transpose();
  return mean / static_cast<double>(rows.size());
}

Matrix covariance_of_rows(const Matrix& X, std::span<const int> rows, const Vector& mean) {
  const auto d = X.cols();
  Matrix cov = Matrix::Zero(d, d);
  for (int i : rows) {
    const Vector r = X.row(i).transpose() - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(r);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  return cov / static_cast<double>(rows.size() - 1);
}

void EllipticalModel::validate() const {
  if (mu0.size() == 0) throw std::invalid_argument("EllipticalModel: empty location");
  if (sigma0.rows() != mu0.size() || sigma0.cols() != mu0.size())
    throw std::invalid_argument("EllipticalModel: scatter dimension mismatch");
  MahalanobisMetric check(sigma0);
}

bool EllipticalModel::spherical() const {
  const int d = dim();
  return (sigma0 - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() == 0.0;
}

EllipticalModel EllipticalModel::standard(int d) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  return EllipticalModel{Vector::Zero(d), Matrix::Identity(d, d), RadialFamily::Gaussian};
}

EllipticalModel EllipticalModel::equicorrelated(int d, double r) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (d > 1 && !(r > -1.0 / (d - 1) && r < 1.0)) throw std::invalid_argument("correlation outside the SPD range");
  Matrix sigma = Matrix::Constant(d, d, r);
  sigma.diagonal().setOnes();
  return EllipticalModel{Vector::Zero(d), sigma, RadialFamily::Gaussian};
}

EllipticalSampler::EllipticalSampler(const EllipticalModel& model) : model_(model) {
  model_.validate();
  lower_ = MahalanobisMetric(model_.sigma0).lower();
}

Vector EllipticalSampler::draw(Engine& eng) const {
  std::normal_distribution<double> normal;
  Vector w(model_.dim());
  for (int j = 0; j < w.size(); ++j) w[j] = normal(eng);
  return model_.mu0 + lower_ * w;
}

Matrix EllipticalSampler::draw_rows(int n, std::uint64_t seed) const {
  Matrix Y(n, model_.dim());
  for (int i = 0; i < n; ++i) {
    Engine eng = substream(seed, Stream::CleanRows, static_cast<std::uint64_t>(i));
    Y.row(i) = draw(eng).transpose();
  }
  return Y;
}

}  // namespace opl
