#pragma once

#include <stdexcept>
#include <string>

namespace regvar {

/// Inputs that violate an operation's preconditions (shape mismatch, bad label, non-finite coordinate).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid configuration: weights, level schedule, grid geometry, phantom geometry.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when the optimization produces a non-finite loss.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace regvar
