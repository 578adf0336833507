#pragma once

#include <stdexcept>
#include <string>

namespace aligngan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A network spec violates a conditioning-placement rule or is malformed.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed IDX / checkpoint / graymap bytes.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace aligngan
