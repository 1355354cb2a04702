#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reskit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length mismatch between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a zero normalizer.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Operation requested for a kernel/activation it does not support.
class KindError : public Error {
public:
    using Error::Error;
};

/// Symmetric factorization failed even after jitter escalation.
class ConditioningError : public NumericError {
public:
    ConditioningError(const std::string& what, double smallest_pivot)
        : NumericError(what), smallest_pivot_(smallest_pivot) {}
    double smallest_pivot() const noexcept { return smallest_pivot_; }

private:
    double smallest_pivot_;
};

/// Bad magic, version, truncation or checksum in a serialized file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// The PDE integrator produced a non-finite field.
class IntegrationError : public NumericError {
public:
    IntegrationError(const std::string& what, std::size_t step)
        : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// A closed-loop forecast produced a non-finite frame.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace reskit
