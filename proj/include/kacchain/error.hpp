#pragma once

#include <stdexcept>
#include <string>

namespace kac {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

class UnsupportedMethod : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "unsupported_method"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical_error"; }
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "budget_exceeded"; }
};

class ConfigError : public Error {
 public:
  ConfigError(int line, std::string field, const std::string& message)
      : Error(message), line_(line), field_(std::move(field)) {}
  const char* kind() const noexcept override { return "config_error"; }
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

// Warnings go to stderr unless silenced (tests silence them).
void log_warning(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace kac
