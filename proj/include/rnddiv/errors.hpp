#pragma once

#include <stdexcept>
#include <string>

namespace rnddiv {

// Error taxonomy mirrors the CLI exit-code contract:
//   ConfigError / UsageError -> 1, DataError / FormatError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Misuse of a library contract (backward without a recorded graph, sgd on a frozen net, ...).
struct UsageError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

// Malformed on-disk input; message carries the byte offset where known.
struct FormatError : DataError {
    using DataError::DataError;
};

struct NumericError : Error {
    using Error::Error;
};

// Shape/extent mismatches. Derived from ConfigError: they surface when a
// network or dataset is wired up inconsistently.
struct DimensionError : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace rnddiv
