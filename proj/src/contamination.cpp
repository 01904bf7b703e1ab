#include "opl/contamination.hpp"

#include <cmath>
#include <stdexcept>

#include "opl/parallel.hpp"

namespace opl {

std::string to_string(ContaminationModel model) {
  switch (model) {
    case ContaminationModel::FDCM: return "fdcm";
    case ContaminationModel::FICM: return "ficm";
    case ContaminationModel::PSICM: return "psicm";
    case ContaminationModel::PCICM_I: return "pcicm-i";
    case ContaminationModel::PCICM_II: return "pcicm-ii";
  }
  return "unknown";
}

ContaminationModel parse_contamination_model(const std::string& name) {
  if (name == "fdcm") return ContaminationModel::FDCM;
  if (name == "ficm") return ContaminationModel::FICM;
  if (name == "psicm") return ContaminationModel::PSICM;
  if (name == "pcicm-i" || name == "pcicm") return ContaminationModel::PCICM_I;
  if (name == "pcicm-ii") return ContaminationModel::PCICM_II;
  throw std::invalid_argument("unknown contamination model: " + name);
}

std::string to_string(OutlierGen::Kind kind) {
  switch (kind) {
    case OutlierGen::Kind::PointMass: return "point-mass";
    case OutlierGen::Kind::GaussianShift: return "gaussian-shift";
    case OutlierGen::Kind::AdditiveShift: return "additive-shift";
  }
  return "unknown";
}

OutlierGen OutlierGen::point_mass(Vector z) {
  OutlierGen g;
  g.kind = Kind::PointMass;
  g.z = std::move(z);
  return g;
}

OutlierGen OutlierGen::gaussian_shift(Vector mean, double var) {
  OutlierGen g;
  g.kind = Kind::GaussianShift;
  g.mean = std::move(mean);
  g.var = var;
  return g;
}

OutlierGen OutlierGen::additive_shift(double t) {
  OutlierGen g;
  g.kind = Kind::AdditiveShift;
  g.t = t;
  return g;
}

void ContaminationSpec::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (model == ContaminationModel::PCICM_I) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (epsilon > gamma) throw std::invalid_argument("PCICM-i requires epsilon <= gamma");
  }
  if (outlier.kind == OutlierGen::Kind::GaussianShift && !(outlier.var > 0.0))
    throw std::invalid_argument("gaussian-shift outliers need a positive variance");
}

double ContaminationSpec::alpha() const {
  switch (model) {
    case ContaminationModel::FDCM: return epsilon;
    case ContaminationModel::FICM: return 0.0;
    case ContaminationModel::PSICM: return epsilon / (2.0 - epsilon);
    case ContaminationModel::PCICM_I: return gamma;
    case ContaminationModel::PCICM_II: return std::sqrt(epsilon);
  }
  return 0.0;
}

double ContaminationSpec::beta() const {
  switch (model) {
    case ContaminationModel::FDCM: return 1.0;
    case ContaminationModel::FICM: return epsilon;
    case ContaminationModel::PSICM: return epsilon / 2.0;
    case ContaminationModel::PCICM_I: return epsilon / gamma;
    case ContaminationModel::PCICM_II: return std::sqrt(epsilon);
  }
  return 0.0;
}

IndicatorRow sample_indicators(const ContaminationSpec& spec, int d, Engine& eng) {
  spec.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Fixed consumption: one row-level uniform, then d cell uniforms.
  const double row_u = unit(eng);
  std::vector<double> cell_u(static_cast<std::size_t>(d));
  for (auto& u : cell_u) u = unit(eng);

  IndicatorRow b = IndicatorRow::Zero(d);
  const double a = spec.alpha();
  const double p = spec.beta();
  auto cellwise = [&] {
    for (int j = 0; j < d; ++j) b[j] = cell_u[static_cast<std::size_t>(j)] < p ? 1 : 0;
  };
  switch (spec.model) {
    case ContaminationModel::FDCM:
      if (row_u < spec.epsilon) b.setOnes();
      break;
    case ContaminationModel::FICM:
      cellwise();
      break;
    case ContaminationModel::PSICM:
      if (row_u < a) b.setOnes();
      else cellwise();
      break;
    case ContaminationModel::PCICM_I:
    case ContaminationModel::PCICM_II:
      if (row_u < a) cellwise();
      break;
  }
  return b;
}

double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

namespace {

double binomial_pmf(int d, int k, double p) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == d ? 1.0 : 0.0;
  return std::round(binomial_coefficient(d, k)) * std::pow(p, k) * std::pow(1.0 - p, d - k);
}

}  // namespace

double delta_k(const ContaminationSpec& spec, int d, int k) {
  spec.validate();
  if (d < 1) throw std::invalid_argument("delta_k: d must be >= 1");
  if (k < 0 || k > d) throw std::invalid_argument("delta_k: k out of range");
  const double eps = spec.epsilon;
  const double a = spec.alpha();
  const double p = spec.beta();
  switch (spec.model) {
    case ContaminationModel::FDCM:
      if (k == 0) return 1.0 - eps;
      if (k == d) return eps;
      return 0.0;
    case ContaminationModel::FICM:
      return binomial_pmf(d, k, eps);
    case ContaminationModel::PSICM:
      return (1.0 - a) * binomial_pmf(d, k, p) + (k == d ? a : 0.0);
    case ContaminationModel::PCICM_I:
    case ContaminationModel::PCICM_II:
      return a * binomial_pmf(d, k, p) + (k == 0 ? 1.0 - a : 0.0);
  }
  return 0.0;
}

double clean_case_prob(const ContaminationSpec& spec, int d) { return delta_k(spec, d, 0); }

namespace {

Vector draw_outliers(const OutlierGen& gen, const Vector& y, Engine& eng) {
  const auto d = y.size();
  std::normal_distribution<double> normal;
  // Always consume d normals so every row advances its stream identically.
  Vector noise(d);
  for (Eigen::Index j = 0; j < d; ++j) noise[j] = normal(eng);
  switch (gen.kind) {
    case OutlierGen::Kind::PointMass:
      return gen.z;
    case OutlierGen::Kind::GaussianShift:
      return gen.mean + std::sqrt(gen.var) * noise;
    case OutlierGen::Kind::AdditiveShift:
      return (y.array() + gen.t).matrix();
  }
  return y;
}

}  // namespace

ContaminatedData contaminate(const Matrix& Y, const ContaminationSpec& spec, std::uint64_t seed,
                             unsigned threads) {
  spec.validate();
  if (!Y.allFinite()) throw std::invalid_argument("contaminate: Y must be finite");
  const int n = static_cast<int>(Y.rows());
  const int d = static_cast<int>(Y.cols());
  if (spec.outlier.kind == OutlierGen::Kind::PointMass && spec.outlier.z.size() != d)
    throw std::invalid_argument("contaminate: point-mass z has the wrong dimension");
  if (spec.outlier.kind == OutlierGen::Kind::GaussianShift && spec.outlier.mean.size() != d)
    throw std::invalid_argument("contaminate: gaussian-shift mean has the wrong dimension");

  ContaminatedData out{Y, IndicatorMatrix::Zero(n, d)};
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    Engine eng = substream(seed, Stream::Contamination, row);
    const IndicatorRow b = sample_indicators(spec, d, eng);
    const Vector y = Y.row(i).transpose();
    const Vector z = draw_outliers(spec.outlier, y, eng);
    for (int j = 0; j < d; ++j) {
      if (b[j]) out.X(i, j) = z[j];
    }
    out.B.row(i) = b.transpose();
  });
  return out;
}

ContaminatedData simulate(const EllipticalModel& model, const ContaminationSpec& spec, int n,
                          std::uint64_t seed, unsigned threads) {
  if (n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  const EllipticalSampler sampler(model);
  return contaminate(sampler.draw_rows(n, seed), spec, seed, threads);
}

Vector sample_H_I_z(std::span<const int> replaced, const Vector& z, const EllipticalSampler& model,
                    Engine& eng) {
  Vector x = model.draw(eng);
  for (int j : replaced) {
    if (j < 0 || j >= x.size()) throw std::invalid_argument("sample_H_I_z: index out of range");
    x[j] = z[j];
  }
  return x;
}

}  // namespace opl
