#pragma once

#include <stdexcept>
#include <string>

namespace coxmix {

// Malformed or invalid input data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not produce a usable result (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A mixture component carries no usable event mass.
class DegenerateComponentError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace coxmix
