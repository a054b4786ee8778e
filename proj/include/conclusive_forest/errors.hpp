#pragma once

#include <stdexcept>
#include <string>

namespace cforest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent model document.
class ModelFormatError : public Error {
public:
    using Error::Error;
};

/// Instance or dataset that does not match the model schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Top-two vote tie: no unique majority to explain.
class TieError : public Error {
public:
    using Error::Error;
};

/// Method code not applicable to the task, or malformed.
class MethodError : public Error {
public:
    using Error::Error;
};

/// Bad configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Rule consequent disagrees with the model prediction.
class ConsequentMismatch : public Error {
public:
    using Error::Error;
};

/// Metric undefined for the given input (e.g. zero coverage).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

}  // namespace cforest
