#pragma once

#include <stdexcept>
#include <string>

namespace cimrel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numeric quantity went NaN/Inf (divergent training, bad gradients).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace cimrel
