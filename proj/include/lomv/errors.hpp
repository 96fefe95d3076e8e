#pragma once

#include <stdexcept>
#include <string>

namespace lomv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or model invariant was violated by the caller.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The input is well-formed but falls outside the standing assumptions
/// (for example a zero sum of beta / specific variance, or no eigengap).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A linear system that should be well conditioned turned out singular.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the 1-based line number when known.
class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, long line)
      : InvalidInput(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace lomv
