#pragma once

#include <stdexcept>
#include <string>

namespace revfilt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Raised when arithmetic produces NaN or Inf; iteration drivers turn it into
// a divergence record.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class FilterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace revfilt
