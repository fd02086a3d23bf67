#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agingsim {

// Bad configuration or parameter set. Maps to exit code 1 in the CLI.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input file; carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A core whose threshold-voltage shift reached V_dd - V_th0.
class EndOfLifeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Process-variation draw produced a non-positive cell; the grid must be resampled.
class ResampleRequired : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated internal invariant (time regression, illegal state transition).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace agingsim
