#pragma once

#include <stdexcept>
#include <string>

namespace deepnotch {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Image or tensor dimensions unsuitable for the requested operation.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent on-disk data (dataset layout, manifests).
class DataError : public Error {
 public:
  using Error::Error;
};

// Checkpoint file that cannot be loaded. reason() distinguishes the cases.
class CheckpointError : public DataError {
 public:
  enum class Reason { kBadMagic, kUnsupportedVersion, kUnknownKind, kTruncated, kShapeMismatch };
  CheckpointError(Reason reason, const std::string& what) : DataError(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

// NaN/Inf encountered in a forward or backward pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace deepnotch
