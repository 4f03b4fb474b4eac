#pragma once

#include <stdexcept>
#include <string>

namespace ceit {

/// Physically invalid parameter set or argument (non-positive rate, bad fraction...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A function was called outside the regime in which it is defined.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration (parameter file, oracle settings, scan grid).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A resolvent or propagator hit a singularity; carries a short reason.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The Liouvillian kernel is not one-dimensional.
class DegenerateKernelError : public std::runtime_error {
public:
    DegenerateKernelError(int dimension)
        : std::runtime_error("steady state is not unique: kernel dimension " +
                             std::to_string(dimension)),
          dimension_(dimension)
    {
    }
    int dimension() const noexcept { return dimension_; }

private:
    int dimension_;
};

}  // namespace ceit
