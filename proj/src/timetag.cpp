#include "qkdnet/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace qkdnet {

namespace {

constexpr std::uint64_t kOffsetMask = 0xFFFFULL;
constexpr std::uint64_t kSyncMask = (1ULL << kSyncCounterBits) - 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

// Signed circular distance from `center` to `target`, result in [-period/2, period/2).
double circular_delta(double center, double target, double period) {
    double d = std::fmod(center - target, period);
    if (d < -period / 2.0) d += period;
    if (d >= period / 2.0) d -= period;
    return d;
}

}  // namespace

std::uint64_t pack_record(const TagRecord& r) {
    if (r.sync > kMaxSyncCounter) throw format_error("sync counter exceeds 40 bits");
    return static_cast<std::uint64_t>(r.offset_ticks) | (r.sync << 16) |
           (static_cast<std::uint64_t>(r.party) << 56);
}

TagRecord unpack_record(std::uint64_t word) {
    if (word >> 58) throw format_error("reserved record bits are not zero");
    TagRecord r;
    r.offset_ticks = static_cast<std::uint16_t>(word & kOffsetMask);
    r.sync = (word >> 16) & kSyncMask;
    r.party = static_cast<Party>((word >> 56) & 0x3);
    if (r.party != Party::A && r.party != Party::B) throw format_error("invalid party id");
    return r;
}

std::uint32_t TagStream::bins_per_period() const {
    return static_cast<std::uint32_t>(std::ceil(period_ps() / kTagResolutionPs));
}

std::vector<std::uint8_t> encode(const TagStream& s) {
    if (s.sync_rate_millihz == 0) throw format_error("sync rate must be positive");
    const double period = s.period_ps();
    std::vector<std::uint8_t> out;
    out.reserve(kTagHeaderBytes + 8 * s.records.size());
    out.insert(out.end(), std::begin(kTagMagic), std::end(kTagMagic));
    put_u16(out, kTagVersion);
    put_u64(out, s.sync_rate_millihz);
    put_u32(out, kTagResolutionPs);
    const TagRecord* prev = nullptr;
    for (const TagRecord& r : s.records) {
        if (static_cast<double>(r.offset_ticks) * kTagResolutionPs >= period)
            throw format_error("record offset lies outside the sync period");
        if (prev && (r.sync < prev->sync ||
                     (r.sync == prev->sync && r.offset_ticks < prev->offset_ticks)))
            throw format_error("records are not sorted by (sync, offset)");
        put_u64(out, pack_record(r));
        prev = &r;
    }
    return out;
}

TagStream decode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kTagHeaderBytes)
        throw format_error("file shorter than the 18-byte header", 0);
    if (std::memcmp(bytes.data(), kTagMagic, 4) != 0) throw format_error("bad magic", 0);
    const std::uint16_t version = get_u16(bytes.data() + 4);
    if (version != kTagVersion)
        throw format_error("unsupported format version " + std::to_string(version), 4);
    TagStream s;
    s.sync_rate_millihz = get_u64(bytes.data() + 6);
    if (s.sync_rate_millihz == 0) throw format_error("sync rate is zero", 6);
    const std::uint32_t res = get_u32(bytes.data() + 14);
    if (res != kTagResolutionPs)
        throw format_error("unsupported resolution " + std::to_string(res) + " ps", 14);
    if ((bytes.size() - kTagHeaderBytes) % 8 != 0)
        throw format_error("trailing partial record",
                           kTagHeaderBytes + (bytes.size() - kTagHeaderBytes) / 8 * 8);
    const double period = s.period_ps();
    const std::size_t n = (bytes.size() - kTagHeaderBytes) / 8;
    s.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = kTagHeaderBytes + 8 * i;
        TagRecord r;
        try {
            r = unpack_record(get_u64(bytes.data() + off));
        } catch (const format_error& e) {
            throw format_error(std::string(e.what()), off);
        }
        if (static_cast<double>(r.offset_ticks) * kTagResolutionPs >= period)
            throw format_error("record offset lies outside the sync period", off);
        if (!s.records.empty()) {
            const TagRecord& p = s.records.back();
            if (r.sync < p.sync || (r.sync == p.sync && r.offset_ticks < p.offset_ticks))
                throw format_error("records are not sorted by (sync, offset)", off);
        }
        s.records.push_back(r);
    }
    return s;
}

void write_tag_file(const std::string& path, const TagStream& s) {
    const auto bytes = encode(s);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw config_error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw config_error("write to '" + path + "' failed");
}

TagStream read_tag_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open tag file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode(bytes);
}

void AnalyzerMap::validate(double period_ps) const {
    if (!(slot_width_ps > 0.0)) throw config_error("slot width must be positive");
    if (!(period_ps > 0.0)) throw config_error("sync period must be positive");
    for (std::size_t i = 1; i < slot_offset_ps.size(); ++i)
        if (!(slot_offset_ps[i] > slot_offset_ps[i - 1]))
            throw config_error("slot offsets must be strictly increasing");
    if (slot_offset_ps.front() < 0.0 || slot_offset_ps.back() >= period_ps)
        throw config_error("slot offsets must lie within the sync period");
    // Circular windows of slot_width_ps centered on the offsets must not overlap.
    for (std::size_t i = 0; i < slot_offset_ps.size(); ++i) {
        const std::size_t j = (i + 1) % slot_offset_ps.size();
        double gap = slot_offset_ps[j] - slot_offset_ps[i];
        if (j == 0) gap += period_ps;
        if (gap < slot_width_ps) throw config_error("slot windows overlap");
    }
}

BinnedStream bin_outcomes(const TagStream& s, Party party, const AnalyzerMap& analyzer) {
    const double period = s.period_ps();
    analyzer.validate(period);
    BinnedStream out;
    const double half = analyzer.slot_width_ps / 2.0;
    for (const TagRecord& r : s.records) {
        if (r.party != party) continue;
        const double center = static_cast<double>(r.offset_ticks) * kTagResolutionPs +
                              kTagResolutionPs / 2.0;
        bool assigned = false;
        for (Outcome o : kOutcomes) {
            const double d = circular_delta(center, analyzer.slot_offset_ps[outcome_index(o)],
                                            period);
            if (d >= -half && d < half) {
                out.events.push_back(BinnedEvent{r.sync, o});
                assigned = true;
                break;
            }
        }
        if (!assigned) ++out.discarded;
    }
    return out;
}

double CoincidenceTable::total() const {
    double t = 0.0;
    for (const auto& row : counts)
        for (double c : row) t += c;
    return t;
}

CoincidenceTable coincidences(const BinnedStream& a, const BinnedStream& b) {
    CoincidenceTable table;
    std::size_t i = 0, j = 0;
    const auto& ea = a.events;
    const auto& eb = b.events;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].sync < eb[j].sync) {
            ++i;
        } else if (eb[j].sync < ea[i].sync) {
            ++j;
        } else {
            const std::uint64_t sync = ea[i].sync;
            std::size_t ia = i, jb = j;
            while (ia < ea.size() && ea[ia].sync == sync) ++ia;
            while (jb < eb.size() && eb[jb].sync == sync) ++jb;
            if (ia - i == 1 && jb - j == 1)
                table.at(ea[i].outcome, eb[j].outcome) += 1.0;
            else
                ++table.ambiguous_pulses;
            i = ia;
            j = jb;
        }
    }
    return table;
}

Histogram2D histogram2d(const TagStream& a, const TagStream& b) {
    if (a.sync_rate_millihz != b.sync_rate_millihz)
        throw format_error("tag streams have different sync rates");
    struct Ev {
        std::uint64_t sync;
        std::uint16_t tick;
    };
    const auto select = [](const TagStream& s, Party p) {
        std::vector<Ev> v;
        for (const TagRecord& r : s.records)
            if (r.party == p) v.push_back(Ev{r.sync, r.offset_ticks});
        return v;
    };
    const std::vector<Ev> ea = select(a, Party::A);
    const std::vector<Ev> eb = select(b, Party::B);
    Histogram2D h;
    h.bins = a.bins_per_period();
    h.counts.assign(static_cast<std::size_t>(h.bins) * h.bins, 0);
    std::size_t i = 0, j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].sync < eb[j].sync) {
            ++i;
        } else if (eb[j].sync < ea[i].sync) {
            ++j;
        } else {
            const std::uint64_t sync = ea[i].sync;
            std::size_t ia = i, jb = j;
            while (ia < ea.size() && ea[ia].sync == sync) ++ia;
            while (jb < eb.size() && eb[jb].sync == sync) ++jb;
            for (std::size_t x = i; x < ia; ++x)
                for (std::size_t y = j; y < jb; ++y) {
                    ++h.counts[static_cast<std::size_t>(ea[x].tick) * h.bins + eb[y].tick];
                    ++h.total;
                }
            i = ia;
            j = jb;
        }
    }
    return h;
}

}  // namespace qkdnet
