#pragma once

#include <stdexcept>
#include <string>

namespace lstmpf {

// Base for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad invocation: unusable flags, out-of-range knobs, refused requests.
class UsageError : public Error {
public:
    using Error::Error;
};

// A file does not conform to one of the on-disk formats.
class FormatError : public Error {
public:
    using Error::Error;
};

// Structurally valid header but inconsistent payload (sizes, counts).
class CorruptionError : public FormatError {
public:
    using FormatError::FormatError;
};

// Semantically invalid data: non-finite values, dimension mismatch,
// empty-voiced utterances, id-set mismatches.
class DataError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace lstmpf
