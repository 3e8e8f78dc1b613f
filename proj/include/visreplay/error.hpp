#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace visreplay {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for malformed or inconsistent LITS scripts. Carries the offending
// step index when the problem is local to one step.
class ScriptError : public Error {
 public:
  explicit ScriptError(const std::string& what,
                       std::optional<std::size_t> step = std::nullopt)
      : Error(step ? "step " + std::to_string(*step) + ": " + what : what),
        step_(step) {}

  std::optional<std::size_t> step() const { return step_; }

 private:
  std::optional<std::size_t> step_;
};

class DeviceError : public Error {
 public:
  using Error::Error;
};

class NotImplemented : public DeviceError {
 public:
  using DeviceError::DeviceError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace visreplay
