#pragma once

#include <stdexcept>
#include <string>

namespace rw {

// Bad user input: malformed config, unknown key, missing file.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated API contract: shape mismatch, stepping a done episode, etc.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Corrupt or incompatible serialized data.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime (non-finite loss/gradient).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rw
