#pragma once

#include <stdexcept>
#include <string>

namespace sns {

/// Base of every error raised by the library. The CLI maps each category to
/// an exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

/// Bad flags, bad config values, violated preconditions on user input.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// Malformed or unreadable data: input points, sketch files, CSVs.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Two sketches (or a sketch and a manifest) disagree on rows/cols/seed.
class IncompatibleSketchError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// A signed 64-bit counter would overflow.
class CounterOverflowError : public Error {
 public:
  using Error::Error;
};

/// A formula was evaluated outside its domain (e.g. rank > r_max).
class DomainError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

// Sketch file parse errors. Each failure mode has its own type.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace sns
