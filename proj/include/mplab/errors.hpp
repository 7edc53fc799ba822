#pragma once

#include <stdexcept>
#include <string>

namespace mplab {

// Caller broke a documented precondition (dimension mismatch, bad label, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A model whose weights cannot define a boundary (e.g. theta = 0).
class DegenerateModelError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Bad configuration or command-line input; maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures; maps to CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ContractViolation(message);
    }
}

}  // namespace mplab
