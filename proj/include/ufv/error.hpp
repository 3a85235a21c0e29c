#pragma once
//! \file
//! Exception types shared by every ufv module.

#include <stdexcept>
#include <string>

namespace ufv {

//! Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//! A value lies outside the domain of an operation (negative time, bad index...).
class DomainError : public Error {
public:
    using Error::Error;
};

//! Matrix / mask / sequence dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

//! A decoded temporal pair has start > end. Signals a model emission error.
class MalformedIntervalError : public Error {
public:
    using Error::Error;
};

//! Input that cannot produce a meaningful result (empty list, zero targets...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

//! Token sequence assembly or reference-token injection failed.
class ConstructionError : public Error {
public:
    using Error::Error;
};

//! Malformed serialized data. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

//! Input data is well-formed but inconsistent (unknown ids, missing frames...).
class DataError : public Error {
public:
    using Error::Error;
};

//! A file or directory could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

//! Training produced non-finite values or exploded.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace ufv
