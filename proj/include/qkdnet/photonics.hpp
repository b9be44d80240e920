#pragma once

#include <cstdint>
#include <vector>

#include "qkdnet/quantum.hpp"
#include "qkdnet/timetag.hpp"

namespace qkdnet {

struct SourceParams {
    double rep_rate_hz = 81.6e6;
    double mu = 0.0;  // expected pairs per pulse for the routed channel pair
    TwoQubitState state = make_psi_plus();
};

struct ArmParams {
    double loss_db = 0.0;  // lumped fiber + analyzer + detector loss
    double dark_rate_hz = 0.0;
    double dead_time_s = 0.0;
    double jitter_sigma_s = 100e-12;
    double misalign_rad = 0.0;  // static rotation of the measurement basis
};

double transmission(double loss_db);

// Sub-losses compose additively in dB.
double compose_loss_db(const std::vector<double>& parts_db);

struct AnalyticRates {
    double singles_a_hz = 0.0;  // all raw detector events, darks included
    double singles_b_hz = 0.0;
    double coincidence_hz = 0.0;  // correlated pairs with both photons detected
    double accidental_hz = 0.0;   // uncorrelated in-window event products per pulse
    double sifted_hz = 0.0;       // matched-basis half of correlated coincidences
};

AnalyticRates analytic_rates(const SourceParams& src, const ArmParams& alice,
                             const ArmParams& bob, const AnalyzerMap& analyzer);

// Simulates pulses [first_pulse, first_pulse + pulse_count). Pulse indices are
// partitioned into fixed absolute blocks, each driven by an independent substream
// of `seed`, so any window of the same run is an exact segment of the full run
// (dead-time filtering excepted: the filter state restarts at the window edge).
TagStream simulate_pulses(const SourceParams& src, const ArmParams& alice, const ArmParams& bob,
                          const AnalyzerMap& analyzer, std::uint64_t first_pulse,
                          std::uint64_t pulse_count, std::uint64_t seed);

TagStream simulate_run(const SourceParams& src, const ArmParams& alice, const ArmParams& bob,
                       const AnalyzerMap& analyzer, double duration_s, std::uint64_t seed);

std::uint64_t pulses_in(double duration_s, double rep_rate_hz);

}  // namespace qkdnet
