#pragma once

#include <stdexcept>
#include <string>

namespace ulab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions disagree with the network or dataset.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& what, long expected, long actual)
      : Error(what + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  long expected() const noexcept { return expected_; }
  long actual() const noexcept { return actual_; }

 private:
  long expected_;
  long actual_;
};

/// A precondition on an argument or configuration value is violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, malformed or insufficient for the request.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up in a loss, gradient or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ulab
