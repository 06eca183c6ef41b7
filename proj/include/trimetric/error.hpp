#ifndef TRIMETRIC_ERROR_HPP_
#define TRIMETRIC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace trimetric {

// Tensor or parameter shapes disagree with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input whose norm is too small to normalize.
class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

// API misuse: stale forward cache, unresolved image id.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid user-facing configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trimetric

#endif  // TRIMETRIC_ERROR_HPP_
