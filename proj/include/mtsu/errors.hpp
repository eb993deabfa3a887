#pragma once

#include <stdexcept>
#include <string>

namespace mtsu {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument, non-finite data, or violated precondition.
class InputError : public Error {
public:
    using Error::Error;
};

/// Arrays whose dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A ModelIndex that does not address the library it is used with.
class InvalidIndexError : public Error {
public:
    using Error::Error;
};

/// An iterative solver exceeded its iteration cap.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Requested configuration is outside what an operation supports.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// A run was cancelled because its time or count budget ran out.
class BudgetExceeded : public Error {
public:
    using Error::Error;
};

} // namespace mtsu
