#pragma once

#include <stdexcept>
#include <string>

namespace permsig {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable input data (CSV content, shapes, label sets).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: divergence, degenerate fit, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace permsig
