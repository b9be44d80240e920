#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdnet/errors.hpp"
#include "qkdnet/grid.hpp"

namespace qkdnet {

struct busy_error : request_error {
    using request_error::request_error;
};

struct Link {
    std::uint64_t pair_id = 0;
    std::string user_a;
    std::string user_b;
    std::uint64_t established_at = 0;  // logical seconds (operation sequence)

    friend bool operator==(const Link&, const Link&) = default;
};

struct WaitEntry {
    std::string user_a;
    std::string user_b;
    std::uint64_t requested_at = 0;

    friend bool operator==(const WaitEntry&, const WaitEntry&) = default;
};

// Wavelength-selective switch state. pair_id is the index into plan.pairs, so
// lower ids mean lower detuning; grants always take the lowest free id.
struct SwitchState {
    ChannelPlan plan;
    std::vector<std::string> users;  // registration order
    std::vector<Link> links;         // ascending pair_id
    std::vector<WaitEntry> waitlist; // FIFO
    std::uint64_t op_seq = 0;

    std::set<std::uint64_t> free_pairs() const;
    bool user_busy(const std::string& name) const;
    bool user_known(const std::string& name) const;
};

bool operator==(const SwitchState& a, const SwitchState& b);

SwitchState make_switch_state(ChannelPlan plan);

void register_user(SwitchState& s, const std::string& name);

struct ConnectResult {
    bool granted = false;
    std::uint64_t pair_id = 0;  // valid when granted
};

// Grants the lowest-detuning free pair if one exists, otherwise waitlists the
// request. Re-requesting an already waitlisted pair is idempotent.
ConnectResult connect(SwitchState& s, const std::string& a, const std::string& b);

// Frees the pair, then scans the waitlist in FIFO order granting every entry
// whose users are idle while free pairs remain (skip-over-busy). Returns the
// links granted from the waitlist.
std::vector<Link> disconnect(SwitchState& s, std::uint64_t pair_id);

struct SwitchStatus {
    std::size_t user_count = 0;
    std::vector<Link> links;
    std::vector<std::uint64_t> free_pairs;
    std::vector<WaitEntry> waitlist;
};

SwitchStatus status(const SwitchState& s);

// Versioned single-document JSON persistence; unknown fields are ignored so the
// schema stays forward-compatible.
std::string switch_state_to_json(const SwitchState& s);
SwitchState switch_state_from_json(const std::string& text);
void save_switch_state(const std::string& path, const SwitchState& s);
SwitchState load_switch_state(const std::string& path);

}  // namespace qkdnet
