#pragma once

#include <stdexcept>
#include <string>

namespace rwad {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed graphs, feature matrices, files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not produce a result.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidGraph : public DataError {
 public:
  using DataError::DataError;
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

/// Line and column are 1-based; column 0 means the whole line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : DataError(what + " (line " + std::to_string(line) +
                  (column > 0 ? ", column " + std::to_string(column) : std::string()) + ")"),
        line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SingularSystem : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateVector : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingleClass : public DataError {
 public:
  using DataError::DataError;
};

class BudgetExceedsSupport : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyGuidance : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InstanceTooSmall : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class NegativeFanSize : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class SearchSpaceTooLarge : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace rwad
