#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emowatch {

// Base of every error the library throws. Callers that only care about
// "pipeline failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value outside the domain of an operation (age < 16, bpm <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed line in a session file or CSV export.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structurally valid lines in an invalid arrangement, or an unreadable
// model file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptySessionError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A configuration or feature-set selector that cannot be satisfied.
class SpecError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Training or split input with a missing class.
class DegenerateLabelError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent labels, e.g. one group carrying two true moods.
class DataError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace emowatch
