#pragma once

#include <stdexcept>
#include <string>

namespace invpot {

// Bad user input: invalid dimensions, counts, ids, malformed config files.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: solver non-convergence, indefinite systems.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace invpot
