#pragma once

#include <stdexcept>
#include <string>

namespace selektor {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller handed us something that violates an operation's contract
// (bad dimensions, a point outside the selection region, alpha not in (0,1)...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// The inputs were fine but the numerics broke down: underflowing masses,
// collapsed importance weights, samplers that cannot move.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DegenerateTiltError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FarTailError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : NumericalError(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw PreconditionError(msg);
}

} // namespace selektor
