#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace frote {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (schemas, CSV files, rules, configs).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Syntax or type error in the rule DSL, carrying a 1-based source position.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : ValidationError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                        message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace frote
