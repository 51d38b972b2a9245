#pragma once

#include <stdexcept>
#include <string>

namespace floodlib {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration or violated precondition (maps to CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Tensor/batch dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// Missing sample id in a flood table or fold map.
struct LookupError : Error {
    using Error::Error;
};

// File and parse failures (CSV, checkpoints, JSON artifacts).
struct IoError : Error {
    using Error::Error;
};

// Metric is mathematically undefined for the given input.
struct MetricError : Error {
    using Error::Error;
};

// A training run produced non-finite losses.
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace floodlib
