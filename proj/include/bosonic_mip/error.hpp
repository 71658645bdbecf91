#pragma once

#include <stdexcept>
#include <string>

namespace bmip {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: dimensions, indices, model contents, configuration values.
/// The CLI maps these to exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A monomial the operator compiler cannot represent (e.g. x̂·p̂ on one mode).
class UnsupportedMonomial : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A coefficient that cannot be turned into an integer by a bounded denominator.
class IntegerizationError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Numerical failure: truncation loss, non-convergence, NaN.
/// The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& what, double deficit)
      : NumericalError(what), deficit_(deficit) {}
  double deficit() const noexcept { return deficit_; }

 private:
  double deficit_;
};

class PropagatorError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace bmip
