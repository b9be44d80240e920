#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qkdnet {

// Bad numeric argument to a pure function (negative wavelength, p outside [0,1], ...).
struct domain_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration value (unsupported channel spacing, overlapping analyzer slots, ...).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed tag file or stream. `offset` is the byte position of the first offending byte,
// or `no_offset` when the failure is not tied to a position (e.g. header mismatch between files).
struct format_error : std::runtime_error {
    static constexpr std::size_t no_offset = static_cast<std::size_t>(-1);

    format_error(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(byte_offset == no_offset
                                 ? msg
                                 : msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}

    explicit format_error(const std::string& msg) : format_error(msg, no_offset) {}

    std::size_t offset;
};

// Switch operation applied to a state it does not fit (disconnect of an inactive pair, ...).
struct state_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejected link request: self-link, unknown user, or a user already holding a link.
struct request_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Density matrix violating the hermiticity / trace / positivity tolerances.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure (eigensolver did not converge, nontrivial imaginary residue).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qkdnet
