#pragma once

#include <stdexcept>
#include <string>

namespace ptc {

// Error taxonomy; every throwing path in the library uses one of these.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes that cannot be combined.
struct ShapeError : Error {
  using Error::Error;
};

// Out-of-range or otherwise invalid configuration value.
struct ParameterError : Error {
  using Error::Error;
};

// Malformed external input: files, sentences, token ids.
struct InputError : Error {
  using Error::Error;
};

// API misuse: an invariant between calls was broken by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Mathematically degenerate input: zero vector, empty mask, all keys masked.
struct DegenerateInputError : Error {
  using Error::Error;
};

}  // namespace ptc
