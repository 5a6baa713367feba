#pragma once

#include <stdexcept>
#include <string>

namespace cwae {

/// Base of every error thrown by the library. The CLI maps each subclass to
/// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad manifest, CSV, schema, config or argument.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A loss or score became NaN/Inf.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Evaluation needs both classes present.
class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

class CorruptFileError : public IoError {
 public:
  using IoError::IoError;
};

class VersionMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class SchemaMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace cwae
