#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tarstop {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Input errors: malformed or inconsistent files.
// ---------------------------------------------------------------------------

class InputError : public Error {
public:
  using Error::Error;
};

class ParseError : public InputError {
public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)), line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string source_;
  std::size_t line_;
};

class DuplicateEntryError : public InputError {
public:
  using InputError::InputError;
};

class NotFoundError : public InputError {
public:
  using InputError::InputError;
};

// ---------------------------------------------------------------------------
// Configuration errors: invalid settings or specs.
// ---------------------------------------------------------------------------

class ConfigError : public Error {
public:
  using Error::Error;
};

/// A structured spec failed validation; field() names the offending key.
class ValidationError : public ConfigError {
public:
  ValidationError(std::string field, const std::string& what)
      : ConfigError(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

// ---------------------------------------------------------------------------
// Numeric errors.
// ---------------------------------------------------------------------------

class NumericError : public Error {
public:
  using Error::Error;
};

class ArgumentError : public NumericError {
public:
  using NumericError::NumericError;
};

class DomainError : public NumericError {
public:
  using NumericError::NumericError;
};

class InsufficientDataError : public NumericError {
public:
  using NumericError::NumericError;
};

class DegenerateDataError : public NumericError {
public:
  using NumericError::NumericError;
};

class FitFailureError : public NumericError {
public:
  using NumericError::NumericError;
};

/// y_max == y_min, so a range-normalised error is undefined.
class UndefinedRangeError : public NumericError {
public:
  using NumericError::NumericError;
};

class DegenerateDistributionError : public NumericError {
public:
  using NumericError::NumericError;
};

} // namespace tarstop
