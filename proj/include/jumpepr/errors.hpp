#pragma once

#include <stdexcept>
#include <string>

namespace jumpepr {

// Bad configuration: unknown family, missing coefficients, invalid CLI input.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure at runtime: divergence, instability, unsupported state.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A standing assumption of the model was violated at an evaluation point.
struct AssumptionError : NumericError {
  using NumericError::NumericError;
};

}  // namespace jumpepr
