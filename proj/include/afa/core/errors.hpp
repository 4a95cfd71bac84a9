#pragma once

#include <stdexcept>
#include <string>

namespace afa {

// Raised when a config, file or CLI input fails validation. Maps to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a persisted artifact (dataset, checkpoint) is corrupt or
// inconsistent with its manifest. Maps to exit code 3.
struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a documented precondition of an operation is violated.
struct ContractViolation : std::logic_error {
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace afa
