// errors.hpp: exception hierarchy shared by all qotto modules.
#pragma once

#include <stdexcept>
#include <string>

namespace qotto {

// Base for failures of a numerical procedure (as opposed to bad input).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thermal tail at the top of the truncated spectrum is too heavy.
class truncation_error : public numerical_error {
 public:
  using numerical_error::numerical_error;
};

// |E_n - E_l| fell below the gap floor.
class degenerate_gap_error : public numerical_error {
 public:
  using numerical_error::numerical_error;
};

// Levels cross (or touch) somewhere on the sampled protocol.
class level_crossing_error : public numerical_error {
 public:
  using numerical_error::numerical_error;
};

// Quadrature, integrator or completeness check did not reach its tolerance.
class convergence_error : public numerical_error {
 public:
  convergence_error(const std::string& what, double achieved)
      : numerical_error(what + " (achieved error " + std::to_string(achieved) + ")"),
        achieved_error(achieved) {}
  double achieved_error;
};

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace qotto
