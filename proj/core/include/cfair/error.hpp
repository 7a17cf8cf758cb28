#pragma once

#include <stdexcept>
#include <string>

namespace cfair {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  config = 2,
  data = 3,
  systematic_difference = 4,
  numerical = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Raised when no minority-group row has a propensity counterpart: the groups
/// do not overlap and counterpart analysis cannot proceed.
class SystematicDifferenceError : public Error {
 public:
  explicit SystematicDifferenceError(const std::string& what)
      : Error(ErrorKind::systematic_difference, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace cfair
