#pragma once

#include <stdexcept>
#include <string>

namespace hpgn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image extents do not satisfy an operation's shape contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An API was called in a state it does not support (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// backward() was invoked on a tape that has already been consumed.
class StaleTapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value, unknown key, or incompatible module wiring.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset directory layout problems.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written, or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible format or code version.
class IncompatibleCheckpoint : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hpgn
