#pragma once

#include <stdexcept>
#include <string>

namespace l3rs {

// Tensor or layout dimensions that do not agree.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// A non-finite value appeared during an inner step; the run has diverged.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration, checkpoint or task description.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace l3rs
