#pragma once

#include <stdexcept>
#include <string>

namespace probcast {

// Error taxonomy. The CLI maps these onto distinct process exit codes
// (config -> 2, data -> 3, numeric/domain -> 4, anything else -> 1).

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad experiment configuration or unusable command-line arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or unusable input data (CSV rows, schemas, file access).
class DataError : public Error {
public:
    using Error::Error;
};

// Tensor dimension mismatch; the message names both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Numeric domain violation (log of non-positive, sigma <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// API precondition violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Non-finite value or diverging computation detected at runtime.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace probcast
