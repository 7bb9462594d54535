#pragma once

#include <stdexcept>
#include <string>

namespace confagg {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct FitError : std::runtime_error {
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidSampleError : std::runtime_error {
  explicit InvalidSampleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace confagg
