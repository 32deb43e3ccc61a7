#pragma once

#include <stdexcept>
#include <string>

namespace fluidq {

/// Invalid problem data: malformed model files, violated model invariants,
/// out-of-range parameters.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the GTH routines when the supplied triplet does not certify an
/// M-matrix of the expected kind (negative or premature zero pivot).
class GthError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// The model has nonnegative mean drift, so no stationary density exists.
class NotPositiveRecurrent : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace fluidq
