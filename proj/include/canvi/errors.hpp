#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace canvi {

/// Forward-model failure (e.g. an ODE trajectory leaving its valid region).
/// Carries the parameter vector that triggered it.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::vector<double> theta)
      : std::runtime_error(what), theta_(std::move(theta)) {}

  const std::vector<double>& theta() const { return theta_; }

 private:
  std::vector<double> theta_;
};

/// Optimization failure (non-finite loss); carries the offending step index.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}

  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace canvi
