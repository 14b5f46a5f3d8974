#pragma once

#include <stdexcept>
#include <string>

namespace mset {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Device, netlist or configuration content is inconsistent.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed text input; `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    [[nodiscard]] int line() const { return line_; }

private:
    int line_ = 0;
};

/// Linear sub-solver breakdown or unmet residual target.
class LinearSolveError : public Error {
public:
    LinearSolveError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

}  // namespace mset
