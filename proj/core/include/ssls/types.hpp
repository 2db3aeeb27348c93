#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ssls {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// n particles of dimension d, one particle per row.
using Ensemble = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated (bad sizes, non-positive parameters, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Score-matching produced a non-finite loss.
class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

/// A particle became NaN/Inf during sampling or propagation.
class NonFiniteEnsemble : public Error {
 public:
  using Error::Error;
};

/// Innovation covariance could not be factorized.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

inline void require_dim(Index actual, Index expected, const char* what) {
  if (actual != expected) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(expected) +
                            ", got " + std::to_string(actual));
  }
}

}  // namespace ssls
