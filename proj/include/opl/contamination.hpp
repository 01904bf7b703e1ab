#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opl/geometry.hpp"
#include "opl/rng.hpp"
#include "opl/types.hpp"

namespace opl {

/// Joint law of the contamination indicators B = diag(B_1, ..., B_d).
///   FDCM     all cells of a row are contaminated together.
///   FICM     cells are contaminated independently.
///   PSICM    with probability alpha = eps/(2-eps) the whole row is spoiled,
///            otherwise cells are independent with beta = eps/2.
///   PCICM_I  with probability 1-gamma the row is clean, otherwise cells are
///            independent with beta = eps/gamma.
///   PCICM_II with probability 1-sqrt(eps) the row is clean, otherwise cells
///            are independent with beta = sqrt(eps).
/// Every model has P(B_i = 1) = eps.
enum class ContaminationModel { FDCM, FICM, PSICM, PCICM_I, PCICM_II };

std::string to_string(ContaminationModel model);
ContaminationModel parse_contamination_model(const std::string& name);

/// Distribution of the outlying values Z.
struct OutlierGen {
  enum class Kind { PointMass, GaussianShift, AdditiveShift };
  Kind kind = Kind::AdditiveShift;
  Vector z;         // PointMass
  Vector mean;      // GaussianShift
  double var = 1.0; // GaussianShift
  double t = 0.0;   // AdditiveShift: Z = Y + t at contaminated cells

  static OutlierGen point_mass(Vector z);
  static OutlierGen gaussian_shift(Vector mean, double var);
  static OutlierGen additive_shift(double t);
};

std::string to_string(OutlierGen::Kind kind);

struct ContaminationSpec {
  ContaminationModel model = ContaminationModel::FICM;
  double epsilon = 0.0;
  double gamma = 0.5;  // PCICM_I only
  OutlierGen outlier;

  void validate() const;
  /// Probability that a row enters its row-level branch (full spoil for
  /// PSICM, cellwise regime for PCICM). 0 for FICM, epsilon for FDCM.
  double alpha() const;
  /// Cell probability inside the cellwise regime.
  double beta() const;
};

/// One draw of diag(B).
IndicatorRow sample_indicators(const ContaminationSpec& spec, int d, Engine& eng);

/// P(exactly k of the d cells are contaminated).
double delta_k(const ContaminationSpec& spec, int d, int k);

/// Probability that a row is perfectly observed (delta_0).
double clean_case_prob(const ContaminationSpec& spec, int d);

struct ContaminatedData {
  Matrix X;
  IndicatorMatrix B;
};

/// X_i = (I - B_i) Y_i + B_i Z_i. Row i uses substream (seed, Contamination, i),
/// so the output does not depend on the thread count.
ContaminatedData contaminate(const Matrix& Y, const ContaminationSpec& spec, std::uint64_t seed,
                             unsigned threads = 1);

/// Clean rows from `model` followed by contamination, both keyed by `seed`.
ContaminatedData simulate(const EllipticalModel& model, const ContaminationSpec& spec, int n,
                          std::uint64_t seed, unsigned threads = 1);

/// A draw from H(I, z): Y ~ H0 with the coordinates in `replaced` set to z.
Vector sample_H_I_z(std::span<const int> replaced, const Vector& z, const EllipticalSampler& model,
                    Engine& eng);

double binomial_coefficient(int n, int k);

}  // namespace opl
