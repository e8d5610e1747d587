#pragma once

#include <stdexcept>

namespace modemfuse {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: configuration/input/usage problems exit 1, numeric failures exit 2.

// Unsupported format, invalid dimensions, bad option values.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unparseable or inconsistent external data (IQ files, config files, results).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite intermediate or final results.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An estimator is inapplicable to the given constellation or the statistics
// it needs are degenerate (zero symbol vector, vanishing posterior mean).
struct EstimatorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse, e.g. aggregating trial records that belong to different cells.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace modemfuse
