#pragma once

#include <stdexcept>
#include <string>

namespace gridmix {

// Argument outside the domain of an operation (s < t, r <= 0, divergent integral).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A closed form is singular for these parameters (sigma = 0, K_c = 0, lambda = 0).
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergence : std::runtime_error {
  NonConvergence(const std::string& what, long steps_taken)
      : std::runtime_error(what), steps(steps_taken) {}
  long steps;
};

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration; carries a field-level diagnostic.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unreadable input or unwritable output.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gridmix
