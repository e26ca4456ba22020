#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace adp {

// All library failures derive from one of the standard exception families so
// callers can catch broadly (std::exception) or narrowly (these types).

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

// Malformed input text or binary payload. `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates the expected schema (arity, key types).
class SchemaError : public ParseError {
 public:
  SchemaError(const std::string& what, std::size_t line = 0, std::string field = {})
      : ParseError(what, line), field_(std::move(field)) {}

  // JSON-pointer-ish path of the offending field, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace adp
