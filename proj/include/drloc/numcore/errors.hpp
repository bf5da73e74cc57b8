#pragma once

#include <stdexcept>
#include <string>

namespace drloc {

/// Invalid configuration or incompatible shapes. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse, e.g. calling backward twice on the same tape.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace drloc
