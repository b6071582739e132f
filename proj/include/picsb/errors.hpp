#pragma once

#include <stdexcept>
#include <string>

namespace picsb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf, divergence, solver non-convergence (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File-system or format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace picsb
