#pragma once

#include <stdexcept>
#include <string>

namespace rmtwin {

// Error categories map onto process exit codes: config=2, data=3, numerical=4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration: bad grid dimensions, unknown keys, out-of-range knobs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid data: too few snapshots, shape mismatches, unparseable files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerically degenerate input: zero-variance maps, zero peak power, singular systems.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace rmtwin
