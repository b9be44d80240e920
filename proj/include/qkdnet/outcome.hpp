#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "qkdnet/errors.hpp"

namespace qkdnet {

// Polarization measurement outcomes. The index order {H, V, D, A} is fixed and shared by
// coincidence tables, analyzer slot maps and report files.
enum class Outcome : std::uint8_t { H = 0, V = 1, D = 2, A = 3 };

inline constexpr std::array<Outcome, 4> kOutcomes{Outcome::H, Outcome::V, Outcome::D, Outcome::A};

constexpr std::size_t outcome_index(Outcome o) { return static_cast<std::size_t>(o); }

constexpr std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::H: return "H";
        case Outcome::V: return "V";
        case Outcome::D: return "D";
        case Outcome::A: return "A";
    }
    return "?";
}

inline Outcome outcome_from_name(std::string_view s) {
    for (Outcome o : kOutcomes)
        if (s == outcome_name(o)) return o;
    throw domain_error("unknown polarization outcome '" + std::string(s) + "'");
}

}  // namespace qkdnet
