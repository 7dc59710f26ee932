#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hhws {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mapped column is missing from the input, or a schema is malformed.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A cell could not be parsed. `row()` is the 1-based data row (header excluded).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  [[nodiscard]] std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

/// Too few distinct values to support a basis of the requested size.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Design matrix is rank deficient at the configured tolerance.
class SingularError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hhws
