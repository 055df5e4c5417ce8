#pragma once

#include <stdexcept>
#include <string>

namespace texflow {

// Shape/size disagreement between arguments (or an argument and its contract).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unsupported file content.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failure (open/read/write/rename).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Degenerate geometry where a well-defined result is required
// (zero-area face, zero-length vertex, ...).
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

// Inputs that leave an operation with nothing to compute
// (empty point sets, no includable faces, missing part labels, ...).
struct DegenerateInputError : std::runtime_error {
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical validity violation (non-finite values, asymmetric covariance, ...).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Request exceeds a hard capacity bound (e.g. subdivision level).
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration value.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace texflow
