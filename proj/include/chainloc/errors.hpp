#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chainloc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad range, bad seed, empty chain...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// An instance or a derived object violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. Carries the 1-based line and the offending field.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, std::string field, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": field '" + field + "': " + what),
        source_(std::move(source)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

}  // namespace chainloc
