#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convexnet {

/// Thrown when a computation produces a non-finite value (overflow, NaN).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown on malformed or inconsistent run configuration.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace convexnet
