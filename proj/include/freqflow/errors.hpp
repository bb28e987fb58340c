#pragma once

#include <stdexcept>
#include <string>

namespace freqflow {

// Contract violations (bad shapes, bad arguments, misuse of an API).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionError : ContractError {
    using ContractError::ContractError;
};

// Numeric failures at runtime: NaN/Inf where finite values are required,
// divergence during integration or optimization.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration problems (unknown keys, out-of-range values).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File and parsing problems.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint-specific load failures, kept distinct so callers can tell a
// wrong-format file from a truncated one from a shape clash.
struct FormatError : IoError {
    using IoError::IoError;
};
struct TruncatedError : IoError {
    using IoError::IoError;
};
struct ShapeMismatchError : IoError {
    using IoError::IoError;
};

} // namespace freqflow
