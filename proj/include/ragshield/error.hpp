#pragma once

#include <stdexcept>
#include <string>

namespace ragshield {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (bad N/k, dimension mismatch, unknown combo).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data is well-formed but semantically wrong (wrong vector length, NaN).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Corrupt or truncated binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Index construction rejected its entries.
class BuildError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure that may succeed if retried later.
class RetriableError : public Error {
 public:
  using Error::Error;
};

}  // namespace ragshield
