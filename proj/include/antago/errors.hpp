#pragma once

#include <stdexcept>
#include <string>

namespace antago {

// Bad or inconsistent configuration input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Estimator training failure (degenerate design matrix, too few samples).
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite state during integration or control. The CLI maps this (and any
// other mid-episode fault) to exit code 3.
class RuntimeFault : public std::runtime_error {
public:
    explicit RuntimeFault(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace antago
