#pragma once

#include <stdexcept>
#include <string>

namespace lendsim {

// Scenario/config file problems; CLI exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model breakdown at runtime (degenerate estimates, bad data); CLI exit code 2.
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Risk target cannot be met by any admissible parameter; CLI exit code 3.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lendsim
