#pragma once

#include <stdexcept>
#include <string>

namespace kflow {

// Error taxonomy mirrors the process exit codes used by the CLI:
// config/usage -> 2, numerical divergence -> 3, I/O or format -> 4.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct divergence_error : std::runtime_error {
    explicit divergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kflow
