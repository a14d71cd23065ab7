#pragma once

#include <stdexcept>
#include <string>

namespace fmp {

/// Base class for all pipeline failures. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 5; }
};

/// Malformed or inconsistent configuration / scenario input.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Corpus or trace content that violates a precondition (missing labels, bad files).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Missing, unreadable or incompatible model file.
class ModelError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// A belief delta that the five-minds state machine does not allow.
class StateMachineError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fmp
