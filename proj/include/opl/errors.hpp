#pragma once

#include <stdexcept>
#include <string>

namespace opl {

// Numerical failures. Argument/usage errors use std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularScatter : public NumericalError {
 public:
  explicit SingularScatter(const std::string& what = "scatter matrix is not positive definite")
      : NumericalError(what) {}
};

class AllPointsRejected : public NumericalError {
 public:
  explicit AllPointsRejected(const std::string& what = "all observations received zero weight")
      : NumericalError(what) {}
};

class DegenerateData : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace opl
