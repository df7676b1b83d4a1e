#pragma once

#include <stdexcept>
#include <string>

namespace kmtpe {

/// Error categories map to CLI exit codes: config/input/capacity -> 2,
/// numeric -> 3, io/integrity -> 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : error {
    using error::error;
};

struct input_error : error {
    using error::error;
};

struct capacity_error : error {
    using error::error;
};

struct numeric_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

struct integrity_error : io_error {
    using io_error::io_error;
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const numeric_error*>(&e)) return 3;
    if (dynamic_cast<const io_error*>(&e)) return 4;
    if (dynamic_cast<const error*>(&e)) return 2;
    return 1;
}

}  // namespace kmtpe
