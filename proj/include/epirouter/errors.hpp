#pragma once

#include <stdexcept>
#include <string>

namespace epirouter {

// Bad input data: unreadable files, malformed records, unknown symbols,
// duplicate ids. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed record in a data file; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A symbol is missing from (or duplicated in) a registry.
class RegistryError : public DataError {
 public:
  using DataError::DataError;
};

// Cross-record consistency failure, e.g. duplicate sample ids.
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace epirouter
