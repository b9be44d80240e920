#include "qkdnet/photonics.hpp"

#include <algorithm>
#include <cmath>

#include "qkdnet/rng.hpp"

namespace qkdnet {

namespace {

constexpr std::uint64_t kBlockPulses = 1ULL << 24;
constexpr std::uint64_t kBlockSalt = 0x70686f746f6e6963ULL;  // substream domain tag

void check_params(const SourceParams& src, const ArmParams& a, const ArmParams& b) {
    if (!(src.rep_rate_hz > 0.0)) throw config_error("rep_rate_hz must be positive");
    if (!(src.mu >= 0.0)) throw config_error("mu must be non-negative");
    for (const ArmParams* arm : {&a, &b}) {
        if (!(arm->loss_db >= 0.0)) throw config_error("loss_db must be non-negative");
        if (!(arm->dark_rate_hz >= 0.0)) throw config_error("dark_rate_hz must be non-negative");
        if (!(arm->dead_time_s >= 0.0)) throw config_error("dead_time_s must be non-negative");
        if (!(arm->jitter_sigma_s >= 0.0))
            throw config_error("jitter_sigma_s must be non-negative");
    }
}

// Cumulative-inversion sampler over a fixed discrete distribution.
struct Categorical {
    std::vector<double> cum;

    explicit Categorical(const std::vector<double>& w) {
        cum.reserve(w.size());
        double run = 0.0;
        for (double x : w) {
            run += x;
            cum.push_back(run);
        }
        if (run > 0.0)
            for (double& c : cum) c /= run;
        cum.back() = 1.0;
    }

    std::size_t sample(Xoshiro256& rng) const {
        const double u = rng.uniform();
        return static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    }
};

}  // namespace

double transmission(double loss_db) {
    if (!(loss_db >= 0.0)) throw domain_error("loss must be non-negative");
    return std::pow(10.0, -loss_db / 10.0);
}

double compose_loss_db(const std::vector<double>& parts_db) {
    double total = 0.0;
    for (double p : parts_db) {
        if (!(p >= 0.0)) throw domain_error("loss components must be non-negative");
        total += p;
    }
    return total;
}

std::uint64_t pulses_in(double duration_s, double rep_rate_hz) {
    if (!(duration_s > 0.0)) throw config_error("duration must be positive");
    if (!(rep_rate_hz > 0.0)) throw config_error("rep_rate_hz must be positive");
    return static_cast<std::uint64_t>(std::llround(duration_s * rep_rate_hz));
}

AnalyticRates analytic_rates(const SourceParams& src, const ArmParams& alice,
                             const ArmParams& bob, const AnalyzerMap& analyzer) {
    check_params(src, alice, bob);
    const double period_s = 1.0 / src.rep_rate_hz;
    analyzer.validate(period_s * 1e12);
    const double pa = transmission(alice.loss_db);
    const double pb = transmission(bob.loss_db);
    const double pair_rate = src.mu * src.rep_rate_hz;

    AnalyticRates r;
    r.singles_a_hz = pair_rate * pa + alice.dark_rate_hz;
    r.singles_b_hz = pair_rate * pb + bob.dark_rate_hz;
    r.coincidence_hz = pair_rate * pa * pb;
    r.sifted_hz = r.coincidence_hz / 2.0;

    // Uncorrelated same-pulse products of in-window extras: pair photons whose
    // partner was lost, plus darks that land inside one of the four slot windows.
    const double window_fraction = 4.0 * analyzer.slot_width_ps / (period_s * 1e12);
    const double extra_a =
        src.mu * pa * (1.0 - pb) + alice.dark_rate_hz * period_s * window_fraction;
    const double extra_b =
        src.mu * (1.0 - pa) * pb + bob.dark_rate_hz * period_s * window_fraction;
    r.accidental_hz = extra_a * extra_b * src.rep_rate_hz;
    return r;
}

TagStream simulate_pulses(const SourceParams& src, const ArmParams& alice, const ArmParams& bob,
                          const AnalyzerMap& analyzer, std::uint64_t first_pulse,
                          std::uint64_t pulse_count, std::uint64_t seed) {
    check_params(src, alice, bob);
    src.state.validate();
    if (first_pulse > kMaxSyncCounter + 1 || pulse_count > kMaxSyncCounter + 1 - first_pulse)
        throw config_error("run exceeds the 40-bit sync counter range");

    const std::uint64_t sync_rate_millihz =
        static_cast<std::uint64_t>(std::llround(src.rep_rate_hz * 1000.0));
    if (sync_rate_millihz == 0) throw config_error("rep_rate_hz must be positive");
    const double period_ps = 1e15 / static_cast<double>(sync_rate_millihz);
    if (period_ps / kTagResolutionPs > 65536.0)
        throw config_error("rep rate too low for the 16-bit offset field");
    analyzer.validate(period_ps);

    const double pa = transmission(alice.loss_db);
    const double pb = transmission(bob.loss_db);

    // Joint outcome distribution for both-detected pairs, and per-party marginals
    // for pairs whose partner photon was lost.
    const auto table = probability_table(src.state, alice.misalign_rad, bob.misalign_rad);
    std::vector<double> joint_w(16);
    std::vector<double> marg_a(4, 0.0), marg_b(4, 0.0);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            joint_w[a * 4 + b] = table[a][b];
            marg_a[a] += table[a][b];
            marg_b[b] += table[a][b];
        }
    const Categorical joint(joint_w), cat_a(marg_a), cat_b(marg_b);

    const std::array<double, 2> jitter_ps{alice.jitter_sigma_s * 1e12, bob.jitter_sigma_s * 1e12};

    const auto make_tick = [&](double offset_ps) {
        double o = std::fmod(offset_ps, period_ps);
        if (o < 0.0) o += period_ps;
        if (o >= period_ps) o = 0.0;
        return static_cast<std::uint16_t>(o / kTagResolutionPs);
    };

    std::vector<TagRecord> events;
    std::vector<TagRecord> block_events;

    const auto photon_event = [&](Xoshiro256& rng, std::uint64_t sync, Party party,
                                  Outcome outcome) {
        const double slot = analyzer.slot_offset_ps[outcome_index(outcome)];
        const double offset = slot + jitter_ps[static_cast<std::size_t>(party)] * rng.normal();
        block_events.push_back(TagRecord{sync, make_tick(offset), party});
    };

    const std::uint64_t end_pulse = first_pulse + pulse_count;
    const std::uint64_t first_block = first_pulse / kBlockPulses;
    const std::uint64_t last_block =
        pulse_count == 0 ? first_block : (end_pulse - 1) / kBlockPulses;

    const double block_s = static_cast<double>(kBlockPulses) / src.rep_rate_hz;
    const double pairs_per_block = src.mu * static_cast<double>(kBlockPulses);
    const double mean_both = pairs_per_block * pa * pb;
    const double mean_a_only = pairs_per_block * pa * (1.0 - pb);
    const double mean_b_only = pairs_per_block * (1.0 - pa) * pb;
    const double mean_dark_a = alice.dark_rate_hz * block_s;
    const double mean_dark_b = bob.dark_rate_hz * block_s;

    for (std::uint64_t block = first_block; pulse_count > 0 && block <= last_block; ++block) {
        Xoshiro256 rng(derive_seed(seed, kBlockSalt, block));
        const std::uint64_t base = block * kBlockPulses;
        block_events.clear();

        // The whole block is always generated from its substream and filtered to
        // the requested range afterwards, which keeps any window of a run an
        // exact segment of the full run.
        const std::uint64_t n_both = rng.poisson(mean_both);
        const std::uint64_t n_a_only = rng.poisson(mean_a_only);
        const std::uint64_t n_b_only = rng.poisson(mean_b_only);
        const std::uint64_t n_dark_a = rng.poisson(mean_dark_a);
        const std::uint64_t n_dark_b = rng.poisson(mean_dark_b);

        for (std::uint64_t k = 0; k < n_both; ++k) {
            const std::uint64_t sync = base + rng.below(kBlockPulses);
            const std::size_t cell = joint.sample(rng);
            photon_event(rng, sync, Party::A, kOutcomes[cell / 4]);
            photon_event(rng, sync, Party::B, kOutcomes[cell % 4]);
        }
        for (std::uint64_t k = 0; k < n_a_only; ++k) {
            const std::uint64_t sync = base + rng.below(kBlockPulses);
            photon_event(rng, sync, Party::A, kOutcomes[cat_a.sample(rng)]);
        }
        for (std::uint64_t k = 0; k < n_b_only; ++k) {
            const std::uint64_t sync = base + rng.below(kBlockPulses);
            photon_event(rng, sync, Party::B, kOutcomes[cat_b.sample(rng)]);
        }
        for (std::uint64_t k = 0; k < n_dark_a; ++k) {
            const std::uint64_t sync = base + rng.below(kBlockPulses);
            block_events.push_back(
                TagRecord{sync, make_tick(rng.uniform() * period_ps), Party::A});
        }
        for (std::uint64_t k = 0; k < n_dark_b; ++k) {
            const std::uint64_t sync = base + rng.below(kBlockPulses);
            block_events.push_back(
                TagRecord{sync, make_tick(rng.uniform() * period_ps), Party::B});
        }

        std::erase_if(block_events, [&](const TagRecord& e) {
            return e.sync < first_pulse || e.sync >= end_pulse;
        });
        std::sort(block_events.begin(), block_events.end(), record_order);
        events.insert(events.end(), block_events.begin(), block_events.end());
    }

    // Non-paralyzable dead time per detector over the merged ordered run.
    if (alice.dead_time_s > 0.0 || bob.dead_time_s > 0.0) {
        const std::array<double, 2> dead_ps{alice.dead_time_s * 1e12, bob.dead_time_s * 1e12};
        std::array<double, 2> last{-1e300, -1e300};
        std::vector<TagRecord> kept;
        kept.reserve(events.size());
        for (const TagRecord& e : events) {
            const auto p = static_cast<std::size_t>(e.party);
            const double t = static_cast<double>(e.sync) * period_ps +
                             static_cast<double>(e.offset_ticks) * kTagResolutionPs;
            if (dead_ps[p] > 0.0 && t - last[p] < dead_ps[p]) continue;
            last[p] = t;
            kept.push_back(e);
        }
        events.swap(kept);
    }

    TagStream out;
    out.sync_rate_millihz = sync_rate_millihz;
    out.records = std::move(events);
    return out;
}

TagStream simulate_run(const SourceParams& src, const ArmParams& alice, const ArmParams& bob,
                       const AnalyzerMap& analyzer, double duration_s, std::uint64_t seed) {
    return simulate_pulses(src, alice, bob, analyzer, 0,
                           pulses_in(duration_s, src.rep_rate_hz), seed);
}

}  // namespace qkdnet
