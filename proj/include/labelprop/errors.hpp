#pragma once

#include <stdexcept>
#include <string>

namespace labelprop {

/// Invalid parameters or inconsistent shapes passed to an engine call.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or unreadable input file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Missing or inconsistent dataset content (missing frames, bad manifests).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace labelprop
