#pragma once

#include <stdexcept>
#include <string>

namespace crowdforge {

// Every failure surfaced by the library derives from Error so callers can
// map categories onto exit codes or HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DependencyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ScorerError : public Error {
 public:
  ScorerError(const std::string& what, int exit_code, std::string diagnostics)
      : Error(what), exit_code_(exit_code), diagnostics_(std::move(diagnostics)) {}

  int exit_code() const noexcept { return exit_code_; }
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  int exit_code_;
  std::string diagnostics_;
};

}  // namespace crowdforge
