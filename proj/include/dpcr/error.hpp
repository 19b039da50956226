#pragma once

#include <stdexcept>
#include <string>

namespace dpcr {

// Base of every error raised by the library. The CLI maps these to a nonzero
// exit code and prints what() on stderr.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

// (M + ridge*I) was not numerically positive definite.
class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, double smallest_pivot)
        : Error(what), smallest_pivot_(smallest_pivot) {}
    double smallest_pivot() const noexcept { return smallest_pivot_; }

private:
    double smallest_pivot_;
};

// Duplicate class id in an information set.
class Conflict : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed dump/checkpoint: bad magic, wrong length.
class FormatError : public Error {
public:
    using Error::Error;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class MissingFile : public IoError {
public:
    using IoError::IoError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Raised when the protocol would touch data it is not allowed to see
// (old-task training features after that task completed).
class ProtocolViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace dpcr
