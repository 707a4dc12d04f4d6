#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ressim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or unparsable scenario input. `assumption()` names the violated
/// modelling assumption ("A1".."A4") when the failure is one, else is empty.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string assumption = {})
      : Error(what), assumption_(std::move(assumption)) {}

  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

/// Geometry/region violation of the disjointness and coverage assumption.
class AssumptionError : public ConfigError {
 public:
  explicit AssumptionError(const std::string& what) : ConfigError(what, "A4") {}
};

/// Numerical failure during a run (non-finite state, solver breakdown).
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ressim
