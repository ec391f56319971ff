#pragma once

#include <stdexcept>
#include <string>

namespace nmqfi {

/// Raised when a numerical routine cannot deliver a trustworthy result
/// (quadrature non-convergence, solver blow-up, singular matrices).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for invalid user-facing configuration; carries the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace nmqfi
