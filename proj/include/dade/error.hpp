#pragma once

#include <stdexcept>
#include <string>

namespace dade {

// Inconsistent parameters or mismatched artifacts. The CLI maps this to
// exit code 2; everything else derived from std::exception maps to 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An argument violates an operation precondition.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace dade
