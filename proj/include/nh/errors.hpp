#pragma once

#include <stdexcept>
#include <string>

namespace nh {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (solver divergence, NaN loss, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, double residual = -1.0)
        : std::runtime_error(what), residual_(residual) {}

    /// Achieved relative residual when the failure came from an iterative solve, else -1.
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Malformed, truncated or mismatched file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A pipeline stage was started before the stage that produces its inputs.
class MissingInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nh
