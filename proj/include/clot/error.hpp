#pragma once

#include <stdexcept>

namespace clot {

// Base for all library failures. Subtypes map onto CLI exit codes:
// input/dimension/parameter/format -> 2, state -> 3, numeric -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : Error {
  using Error::Error;
};
struct DimensionError : InputError {
  using InputError::InputError;
};
struct ParamError : InputError {
  using InputError::InputError;
};
struct FormatError : InputError {
  using InputError::InputError;
};
struct StateError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

}  // namespace clot
