#pragma once

#include <stdexcept>
#include <string>

namespace maflow {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between params, data or configuration.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared in a value that must stay finite.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration: unknown keys, bad enum values, missing fields.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (IDX, CSV, checkpoint).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A recorded trajectory is replayed against parameters it was not recorded with.
class StaleTapeError : public Error {
public:
    using Error::Error;
};

}  // namespace maflow
