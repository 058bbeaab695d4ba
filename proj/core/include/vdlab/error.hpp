#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vdlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain input.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mollifier radius too small for the grid.
class ResolutionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// An iteration failed to converge or produced NaN. Carries the best iterate seen.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double last_residual, std::vector<double> best = {})
      : Error(what), last_residual_(last_residual), best_(std::move(best)) {}

  double last_residual() const noexcept { return last_residual_; }
  const std::vector<double>& best_iterate() const noexcept { return best_; }

 private:
  double last_residual_;
  std::vector<double> best_;
};

/// A structural identity that must hold exactly (up to rounding) was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {}, int line = 0)
      : Error(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  std::string key_;
  int line_;
};

/// A pipeline stage was invoked before the stage that produces its inputs.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(const std::string& what, std::string stage)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& required_stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace vdlab
