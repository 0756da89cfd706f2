#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mrsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required input column is missing or malformed.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A value could not be parsed. Carries the 1-based data row when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row = -1) : Error(what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

/// Feature dimension or shape disagreement between a model and its input.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numerical fit did not produce a usable model.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value. `field()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mrsl
