#pragma once

#include <stdexcept>
#include <string>

namespace mbti {

/// Base class of every error raised by the toolkit. The CLI maps the
/// subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command-line usage or an inconsistent configuration (exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable input, malformed records, invalid labels (exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class InvalidLabel : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite losses or gradients, failed fits (exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace mbti
