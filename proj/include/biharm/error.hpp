#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace biharm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset()` is the byte offset of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation failure: unbound variable, or a value outside a function's domain.
class EvalError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class UnsupportedDomainError : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations. Carries the last residual reached.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A mathematical precondition on caller data does not hold (e.g. no admissible nodes).
class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace biharm
