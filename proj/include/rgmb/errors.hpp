#pragma once

#include <stdexcept>
#include <string>

namespace rgmb {

/// Argument outside the documented domain of an operation.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Zero-length time interval where a proper step is required.
class DegenerateIntervalError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

/// Model, prior or experiment configuration violates a standing assumption.
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The state is numerically impossible (e.g. every likelihood weight underflowed).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IndeterminateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace rgmb
