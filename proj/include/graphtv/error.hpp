#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphtv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reasons a graph fails validation at construction time.
enum class GraphErrorKind {
    DuplicateEdge,
    SelfLoop,
    NonPositiveWeight,
    IndexOutOfRange,
};

class GraphValidationError : public Error {
public:
    GraphValidationError(GraphErrorKind kind, const std::string& what)
        : Error(what), kind_(kind) {}
    GraphErrorKind kind() const noexcept { return kind_; }

private:
    GraphErrorKind kind_;
};

/// Field shape does not conform to the graph or to another operand.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Caller-supplied parameter outside its admissible range.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Explicit time step outside the stability bound.
class StepSizeError : public Error {
public:
    using Error::Error;
};

/// A solver or trainer produced a non-finite value.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace graphtv
