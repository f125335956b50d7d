#pragma once

#include <stdexcept>
#include <string>

namespace ccp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad dimensions, non-finite values, out-of-range indices.
class InputError : public Error {
public:
    using Error::Error;
};

/// A least-squares problem whose design is (numerically) rank deficient.
class SingularFitError : public Error {
public:
    using Error::Error;
};

/// An interval too short for the requested operation.
class IntervalError : public Error {
public:
    using Error::Error;
};

} // namespace ccp
