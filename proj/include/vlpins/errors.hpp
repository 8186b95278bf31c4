#pragma once

#include <stdexcept>
#include <string>

namespace vlpins {

/// Quaternion handed to an operation that requires unit norm.
class InvalidQuaternion : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// LED and receiver coincide, so no line of sight exists.
class DegenerateGeometry : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Derivative denominators vanish (grazing incidence or irradiance).
class NearSingular : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// RSS change-rate ratio requested with a reference value at or below the floor.
class UndefinedRatio : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad configuration, schema or input data.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vlpins
