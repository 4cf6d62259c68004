#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rave {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class InvalidTable : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Bitstream / container errors. Each failure mode is its own class so callers
/// can tell a corrupt header from a short read.
class FormatError : public Error {
public:
    using Error::Error;
};

class BadMagic : public FormatError {
public:
    using FormatError::FormatError;
};

class UnsupportedVersion : public FormatError {
public:
    using FormatError::FormatError;
};

class CrcMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedPayload : public FormatError {
public:
    using FormatError::FormatError;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(std::size_t iteration, const std::string& what)
        : Error(what), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// Requested rate lies below the lowest anchor.
class RateOutOfRange : public Error {
public:
    using Error::Error;
};

}  // namespace rave
