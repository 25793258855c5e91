#pragma once

#include <stdexcept>
#include <string>

namespace hgdiff {

/// Base exception for every contract violation raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an input fails a precondition (shape, range, validity).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised when an iterative procedure breaks down numerically.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace hgdiff
