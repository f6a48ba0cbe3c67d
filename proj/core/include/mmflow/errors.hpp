#pragma once

#include <stdexcept>
#include <string>

namespace mmflow {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed arguments: mismatched sizes, unsorted particles, bad configs.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation (u > 1, x < 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Problem too large for an oracle-scale routine.
class CapacityError : public Error {
public:
    using Error::Error;
};

// An iterative method failed to reach its tolerance.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace mmflow
