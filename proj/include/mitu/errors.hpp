#pragma once

#include <stdexcept>
#include <string>

namespace mitu {

// Wrong or malformed input data (files, masks, labels). CLI exit code 1.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (bad flags, bad config file, bad module setup). CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / operation contract violations.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Geometry that cannot be measured (degenerate axis, overlapping structures).
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mitu
