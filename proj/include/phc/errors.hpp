#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phc {

/// Invalid user input: bad parameters, malformed config, violated invariants.
/// `line` is set when the error comes from a config file (1-based, 0 = n/a).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what, std::size_t line = 0)
        : std::invalid_argument(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A computation that failed numerically (instability, singular matrix,
/// non-convergence that the caller asked to be fatal).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Field blow-up detected during time stepping.
class InstabilityError : public NumericalError {
public:
    InstabilityError(long step, std::size_t cell, double magnitude)
        : NumericalError("field instability at step " + std::to_string(step) + ", cell " +
                         std::to_string(cell) + " (|F| = " + std::to_string(magnitude) + ")"),
          step_(step), cell_(cell) {}
    long step() const noexcept { return step_; }
    std::size_t cell() const noexcept { return cell_; }

private:
    long step_;
    std::size_t cell_;
};

}  // namespace phc
