#pragma once

#include <stdexcept>
#include <string>

namespace nzlab {

// Operands whose shapes disagree with each other or with the model.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad input values: non-Hermitian Hamiltonians, malformed configs, empty
// grids, nonpositive steps, and similar precondition violations.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A requested time horizon exceeds the usable fraction of the bath
// recurrence time. Results beyond that point would be recurrence artifacts.
struct WindowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Time stepping went bad (trace drift, instability). Suggests a smaller dt.
struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A correlated-state recipe produced a (near) zero-trace state.
struct DegenerateRecipeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolvent regulator too small against the spectral gaps it must blur.
struct ConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nzlab
