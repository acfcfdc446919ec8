#pragma once

#include <stdexcept>
#include <string>

namespace fedvln {

// Base class for UI/CLI-facing failures so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument values: out-of-range rates, non-finite parameters, malformed inputs.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Mismatched vector lengths or incompatible partition layouts.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Violations of the client/server exchange contract (duplicate client ids, etc).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// No route exists between two cells of an environment.
class NoPathError : public Error {
public:
    using Error::Error;
};

// Episode sampling gave up after too many rejected draws.
class SamplingExhaustedError : public Error {
public:
    using Error::Error;
};

// Unreadable, unknown, or inconsistent configuration input.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A required on-disk input (dataset, checkpoint, log) is absent or corrupt.
class MissingArtifactError : public Error {
public:
    using Error::Error;
};

// Filesystem failures: unwritable output directory, short writes, held locks.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace fedvln
