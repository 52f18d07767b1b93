#pragma once

#include <stdexcept>
#include <string>

namespace cn {

// Error taxonomy shared by the library and the command line tool. The tool
// maps each class to a distinct process exit code, so new error kinds should
// extend one of these rather than throwing std::runtime_error directly.

// Malformed request: bad shapes, out-of-range arguments, inconsistent options.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unusable input data: schema violations, non-numeric cells, degenerate columns.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Training or evaluation produced a non-finite quantity and cannot continue.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Operation invoked on an object in the wrong state (e.g. backward pass
// without a cached forward pass).
class StateError : public std::runtime_error {
public:
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

// File-level failure: unreadable path, unwritable directory, corrupt payload.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cn
