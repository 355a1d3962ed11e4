#pragma once

#include <stdexcept>
#include <string>

namespace pcmea {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& where, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Input is well-formed but violates a data invariant (unknown id, duplicate, non-finite).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Caller passed an out-of-domain argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Shape or dimension disagreement in a file or between configured components.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Model or trainer configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Loss or gradient became non-finite during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible version or config.
class IncompatibleCheckpoint : public Error {
 public:
  using Error::Error;
};

/// File system failure. The message names the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcmea
