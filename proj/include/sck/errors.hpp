#pragma once

#include <stdexcept>
#include <string>

namespace sck {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or vector shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the admissible domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is numerically singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A structural hypothesis of an operation (symmetry, ...) does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Diffusion coefficient fails the ellipticity requirement.
class EllipticityError : public Error {
 public:
  using Error::Error;
};

/// A coefficient function produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Monte Carlo ensemble diverged.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix is rank deficient.
class RegressionError : public Error {
 public:
  using Error::Error;
};

}  // namespace sck
