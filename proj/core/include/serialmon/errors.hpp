#pragma once

#include <stdexcept>
#include <string>

namespace serialmon {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed: non-convergence, overflow, singular input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation at an integrable singularity of a density.
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Invalid or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace serialmon
