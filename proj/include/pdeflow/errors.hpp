#pragma once

#include <stdexcept>
#include <string>

namespace pdeflow {

// Misuse of an API contract (mismatched traces, bad dimensions, ...).
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

// A training run became numerically invalid (NaN loss or gradient).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pdeflow
