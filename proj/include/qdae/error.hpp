#pragma once

#include <stdexcept>
#include <string>

namespace qdae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions do not line up for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value-level precondition failed (empty tensor, non-finite range, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Bad or conflicting configuration, detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data is malformed or incomplete (missing clip id, bad label row, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// An operation was called in the wrong state (e.g. backward without cache).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// File exists but is not in the expected format (magic, dtype, wav layout).
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Training diverged; message names the epoch and step.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// AUC/EER undefined (a class has no positives or no negatives).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdae
