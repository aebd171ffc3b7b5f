#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace captree {

/// Malformed input: bad tree specs, invalid ids, out-of-range parameters.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative oracle ran out of budget before certifying its answer.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what + " (residual " + format_residual(residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          residual_(residual),
          iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    static std::string format_residual(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", r);
        return buf;
    }

    double residual_;
    long iterations_;
};

}  // namespace captree
