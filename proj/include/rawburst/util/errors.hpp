#pragma once

#include <stdexcept>
#include <string>

namespace rawburst {

/// Bad input: malformed files, out-of-range parameters, shape mismatches.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: divergence, non-finite values, singular systems.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A feature map carries no usable signal (all zero, all excluded).
class NoSignalError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

} // namespace rawburst
