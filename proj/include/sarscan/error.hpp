#pragma once

#include <stdexcept>
#include <string>

namespace sarscan {

// Malformed or inconsistent user input (files, flags, preconditions).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that cannot produce a finite answer for valid input
// (singular systems, zero residual variance, all candidates degenerate).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sarscan
