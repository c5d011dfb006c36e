#pragma once

#include <stdexcept>
#include <string>

namespace sdfsplat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain numeric input.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A caller broke a documented precondition (shape mismatch, empty input, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

/// Inconsistent run configuration, detected before any work starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Geometry too degenerate to produce the requested output.
class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

}  // namespace sdfsplat
