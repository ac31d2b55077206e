#pragma once

#include <stdexcept>
#include <string>

namespace sso {

// Shape/size disagreement between two arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Index or label outside its valid domain.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Request exceeds a configured size cap (factorial growth guard).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed input data; message carries file/line context where known.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or numerically invalid state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged or could not proceed.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

// API used against its documented contract.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sso
