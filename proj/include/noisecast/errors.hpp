#pragma once

#include <stdexcept>
#include <string>

namespace noisecast {

// Error taxonomy shared by the library and the CLI exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed arguments violating a precondition (shape mismatch, bad
// config value, non-finite input).
struct InvalidInput : Error {
    using Error::Error;
};

// A numeric routine failed: decomposition did not converge, singular
// system where an inverse was required, iteration limit hit.
struct NumericalError : Error {
    using Error::Error;
};

// Problems with user-supplied data files (CSV parse errors, missing
// columns, malformed cells).
struct DataError : Error {
    using Error::Error;
};

// CLI/config-level problems.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace noisecast
