#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cosserat {

// Strain measure reached or exceeded the limit surface (Q >= 1), or a request
// was made at a singular point of the constitutive map.
struct StrainLimitError : std::runtime_error {
  double q;
  explicit StrainLimitError(double q_, const std::string& what_)
      : std::runtime_error(what_), q(q_) {}
};

// Linear solver failure; carries the relative residual history.
struct SolverError : std::runtime_error {
  std::vector<double> residual_history;
  explicit SolverError(const std::string& what_, std::vector<double> hist = {})
      : std::runtime_error(what_), residual_history(std::move(hist)) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cosserat
