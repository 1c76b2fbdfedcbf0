#pragma once

#include <stdexcept>
#include <string>

namespace ddopt {

/// Invalid input, configuration, or sequence. Maps to CLI exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An eigenphase sits at (or too close to) the principal-branch cut at +-pi,
/// so the matrix logarithm is ambiguous. Shrink the cycle time.
class BranchAmbiguityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ddopt
