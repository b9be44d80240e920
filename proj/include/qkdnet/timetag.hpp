#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qkdnet/errors.hpp"
#include "qkdnet/outcome.hpp"

namespace qkdnet {

enum class Party : std::uint8_t { A = 0, B = 1 };

constexpr std::string_view party_name(Party p) { return p == Party::A ? "A" : "B"; }

// One detector event: 64-bit packed record.
//   bits 0-15   offset within the sync period, 64-ps ticks
//   bits 16-55  sync pulse counter (40 bits)
//   bits 56-57  party id
//   bits 58-63  reserved, zero
struct TagRecord {
    std::uint64_t sync = 0;
    std::uint16_t offset_ticks = 0;
    Party party = Party::A;

    friend auto operator<=>(const TagRecord&, const TagRecord&) = default;
};

inline constexpr std::uint64_t kSyncCounterBits = 40;
inline constexpr std::uint64_t kMaxSyncCounter = (1ULL << kSyncCounterBits) - 1;

std::uint64_t pack_record(const TagRecord& r);
TagRecord unpack_record(std::uint64_t word);

// Records ordered by (sync, offset); party breaks ties so encoded files are
// byte-deterministic.
inline bool record_order(const TagRecord& a, const TagRecord& b) {
    if (a.sync != b.sync) return a.sync < b.sync;
    if (a.offset_ticks != b.offset_ticks) return a.offset_ticks < b.offset_ticks;
    return a.party < b.party;
}

inline constexpr char kTagMagic[4] = {'Q', 'T', 'T', '1'};
inline constexpr std::uint16_t kTagVersion = 1;
inline constexpr std::uint32_t kTagResolutionPs = 64;
inline constexpr std::size_t kTagHeaderBytes = 18;

// Header (little-endian): magic "QTT1", u16 version, u64 sync rate in mHz,
// u32 resolution in ps; then packed records sorted by (sync, offset).
struct TagStream {
    std::uint64_t sync_rate_millihz = 0;
    std::vector<TagRecord> records;

    double period_ps() const {
        if (sync_rate_millihz == 0) throw domain_error("sync rate must be positive");
        return 1e15 / static_cast<double>(sync_rate_millihz);
    }
    std::uint32_t bins_per_period() const;
};

std::vector<std::uint8_t> encode(const TagStream& s);
TagStream decode(const std::vector<std::uint8_t>& bytes);
void write_tag_file(const std::string& path, const TagStream& s);
TagStream read_tag_file(const std::string& path);

// Passive analyzer slot map: outcome x lands in the 1-ns window centered at
// slot_offset_ps[x]; windows are circular within the sync period.
struct AnalyzerMap {
    std::array<double, 4> slot_offset_ps{0.0, 2500.0, 5000.0, 7500.0};
    double slot_width_ps = 1000.0;

    void validate(double period_ps) const;
};

struct BinnedEvent {
    std::uint64_t sync = 0;
    Outcome outcome = Outcome::H;
};

struct BinnedStream {
    std::vector<BinnedEvent> events;  // sync-ordered
    std::uint64_t discarded = 0;      // events outside every slot window
};

// Assigns each record of the given party to the slot window containing its tick
// center; events outside every window are dropped and counted.
BinnedStream bin_outcomes(const TagStream& s, Party party, const AnalyzerMap& analyzer);

struct CoincidenceTable {
    // counts[a][b]: coincidences with Alice outcome a, Bob outcome b. Stored as
    // doubles so expected-value tables can be analyzed with the same code.
    std::array<std::array<double, 4>, 4> counts{};
    std::uint64_t ambiguous_pulses = 0;  // pulses dropped for multiple candidate pairings

    double& at(Outcome a, Outcome b) { return counts[outcome_index(a)][outcome_index(b)]; }
    double at(Outcome a, Outcome b) const { return counts[outcome_index(a)][outcome_index(b)]; }
    double total() const;
};

// Pulses where each party saw exactly one binned event contribute one count;
// pulses with both parties present but multiple events on either side are ambiguous.
CoincidenceTable coincidences(const BinnedStream& a, const BinnedStream& b);

struct Histogram2D {
    std::uint32_t bins = 0;  // per axis, ceil(period / 64 ps)
    std::vector<std::uint64_t> counts;  // bins x bins, row-major (A bin, B bin)
    std::uint64_t total = 0;

    std::uint64_t at(std::uint32_t a, std::uint32_t b) const {
        return counts[static_cast<std::size_t>(a) * bins + b];
    }
};

// Tallies (tick_A, tick_B) over every event pair sharing a sync index, party A
// drawn from `a`, party B from `b`. Headers must agree.
Histogram2D histogram2d(const TagStream& a, const TagStream& b);

}  // namespace qkdnet
