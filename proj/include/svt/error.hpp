#pragma once

#include <stdexcept>
#include <string>

namespace svt {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument, dimension mismatch or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// File contents do not follow the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input is valid but degenerate for the requested computation
/// (zero variance, no triangles, empty mask).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Optimization produced a non-finite value or an exploding loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace svt
