#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cryoplan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown hole / patch / square / grid / dataset identifier.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function (e.g. t < t0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IllegalAction : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Hierarchy invariant violated by the record at `row` (1-based).
class RecordError : public ConfigError {
 public:
  RecordError(std::size_t row, const std::string& what)
      : ConfigError("row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Truncated, corrupt or version-mismatched binary container.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cryoplan
