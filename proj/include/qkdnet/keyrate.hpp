#pragma once

#include <cstdint>
#include <vector>

#include "qkdnet/errors.hpp"
#include "qkdnet/timetag.hpp"

namespace qkdnet {

double binary_entropy(double x);

struct QberEstimate {
    double e_h = 0.0;
    double e_d = 0.0;
    double sigma_h = 0.0;  // one standard deviation, binomial
    double sigma_d = 0.0;
    double n_h = 0.0;  // matched-basis coincidence counts
    double n_d = 0.0;
};

// e_H counts the correlated H/V outcomes (the source anticorrelates there);
// e_D counts the anticorrelated D/A outcomes.
QberEstimate qber(const CoincidenceTable& c);

struct RateWithBar {
    double bps = 0.0;
    double bar3 = 0.0;  // 3 sigma
};

// Correct-outcome counts over the acquisition time; Poisson 3-sigma bar.
RateWithBar sifted_rate(const CoincidenceTable& c, double t_acq_s);

struct SecureRate {
    double bps = 0.0;
    double bar3 = 0.0;
    bool below_threshold = false;  // QBER at or past 50%, or a negative raw rate
};

// R_sec = R_sif (1 - 1/2 [h(e_H^u) + h(e_D^u)] - 1/2 f [h(e_H) + h(e_D)]),
// e^u = e + 3 sigma capped at 1/2. The bar is first-order propagation over the
// sifted-rate and QBER uncertainties.
SecureRate secure_rate(const RateWithBar& sifted, const QberEstimate& q, double f_ec = 1.2);

// Finite-key bars reconstructed from published aggregates: n per basis is half
// the sifted total, sigma is binomial unless explicit 3-sigma bars are given.
RateWithBar published_sifted(double sifted_bps, double t_acq_s);
QberEstimate published_qber(double e_h, double e_d, double sifted_bps, double t_acq_s,
                            double bar3_h = 0.0, double bar3_d = 0.0);

struct ImprovementScenario {
    bool dual_detectors = false;      // x4: both bases keep both outcomes
    bool splice_loss = false;         // x4: removing 3 dB per arm
    bool detector_efficiency = false; // x9: 60% vs 20% detectors on both arms
    bool rep_rate = false;            // x25: GHz-class pump
    std::uint32_t channels = 1;

    double factor() const;
};

struct Projection {
    double factor = 1.0;
    double per_channel_bps = 0.0;
    double aggregate_bps = 0.0;
};

Projection project_scenario(double base_secure_bps, const ImprovementScenario& s);

struct StabilityPoint {
    std::size_t window_index = 0;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    bool empty = false;  // a basis recorded no coincidences in this window
    QberEstimate q;
};

// Splits sync-ordered binned events into fixed pulse windows and estimates the
// QBER per window; windows with an empty basis are flagged, not errors.
std::vector<StabilityPoint> stability_series(const BinnedStream& a, const BinnedStream& b,
                                             std::uint64_t pulses_per_window,
                                             std::uint64_t total_pulses, double rep_rate_hz);

}  // namespace qkdnet
