#pragma once

#include <stdexcept>
#include <string>

namespace procan {

// Error categories surfaced to callers and to the CLI exit path. Each carries
// a human-readable message that names the violated constraint.

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error("dimension error: " + what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error("configuration error: " + what) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error("data error: " + what) {}
};

struct StateError : std::runtime_error {
  explicit StateError(const std::string& what) : std::runtime_error("state error: " + what) {}
};

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error("usage error: " + what) {}
};

}  // namespace procan
