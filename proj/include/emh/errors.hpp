#pragma once

#include <stdexcept>
#include <string>

namespace emh {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed input text (CSV rows, config lines)
struct ParseError : Error {
    using Error::Error;
};

// structurally valid input that violates a domain invariant
struct ValidationError : Error {
    using Error::Error;
};

// bad experiment configuration (unknown symbol, missing fixture, ...)
struct ConfigError : Error {
    using Error::Error;
};

// tensor/vector dimension mismatch
struct ShapeError : Error {
    using Error::Error;
};

// filesystem failures (cache writes, report emission)
struct StorageError : Error {
    using Error::Error;
};

// remote source failure after bounded retries
struct FetchError : Error {
    using Error::Error;
};

struct NotFoundError : Error {
    using Error::Error;
};

struct NoDataError : Error {
    using Error::Error;
};

// degenerate numeric situations: constant scaler column, zero-variance
// Sharpe denominator, undefined correlation
struct NumericError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    DivergenceError(const std::string& what, int epoch_idx)
        : Error(what), epoch(epoch_idx) {}
    int epoch;
};

} // namespace emh
