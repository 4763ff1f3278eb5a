#pragma once

#include <stdexcept>
#include <string>

namespace t2 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, schema, rule text or plan document.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or schema-violating data (CSV cells, reply rows, records).
class DataError : public Error {
public:
    using Error::Error;
};

/// Generator backend failed (transport, exhausted retries, unusable replies).
class BackendError : public Error {
public:
    using Error::Error;
};

/// Numerical fitting failed to converge or produced non-finite values.
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace t2
