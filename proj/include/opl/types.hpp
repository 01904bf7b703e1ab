#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace opl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Contamination indicators, one entry per cell (0 = clean, 1 = replaced).
using IndicatorRow = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;
using IndicatorMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace opl
