#pragma once

#include <stdexcept>
#include <string>

namespace coep {

/// Shapes that cannot be combined by an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values where finite ones are required.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Token or class ids outside their valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Misuse of the gradient tape (e.g. a second backward over a consumed graph).
class GradientError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid hyperparameter such as a non-positive temperature.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated precondition of a model-level operation (empty memory, empty target).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace coep
