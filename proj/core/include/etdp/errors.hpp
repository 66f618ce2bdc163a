#pragma once

#include <stdexcept>
#include <string>

namespace etdp {

// Error categories map one-to-one onto the CLI exit codes:
// input 1, configuration 2, internal numeric 3, oracle mismatch 4.
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct internal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace etdp
