#pragma once

#include <stdexcept>
#include <string>

namespace qtasep {

// Argument outside the documented domain of a function or type.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed user input (config files, presets, CLI values).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ProfileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ContourError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numerical failures. These map to exit code 3 in the CLI.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public NumericError {
 public:
  using NumericError::NumericError;
};

class ToleranceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class QuadratureError : public NumericError {
 public:
  using NumericError::NumericError;
};

class PoleError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Simulator runtime failures.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qtasep
