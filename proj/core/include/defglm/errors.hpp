#pragma once

#include <stdexcept>
#include <string>

namespace defglm {

// Error taxonomy. The CLI maps these onto its exit codes:
// ConfigError -> 2, DataError/DomainError -> 3, NumericError -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (y outside the
/// support, gamma <= 0, x outside a natural spline's interval).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: bad dimensions, too few knots, k > n, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to reach its contract (truncation did not
/// converge, a fit diverged everywhere).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace defglm
