#pragma once

#include <stdexcept>
#include <string>

namespace inmerge {

// Base of every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or argument contract violated by the caller.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset directory problems.
class DataError : public Error {
 public:
  enum class Kind { kMissingFile, kSizeMismatch, kLabelDomain, kInvalid };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// NaN/Inf produced during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Checkpoint file problems.
class CheckpointError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kCorruptHeader,
    kOffsetOverlap,
    kUnknownDtype,
    kTruncated,
    kMismatch
  };

  CheckpointError(Kind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace inmerge
