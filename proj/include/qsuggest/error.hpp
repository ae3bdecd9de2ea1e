#pragma once

#include <stdexcept>
#include <string>

namespace qsuggest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or record.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input that violates an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace qsuggest
