#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qkdnet/config.hpp"
#include "qkdnet/keyrate.hpp"
#include "qkdnet/netalloc.hpp"

namespace qkdnet {

struct LinkReport {
    std::uint64_t pair_id = 0;
    std::string user_a;
    std::string user_b;
    double signal_nm = 0.0;
    double idler_nm = 0.0;
    double detuning_ghz = 0.0;

    AnalyticRates analytic;

    std::uint64_t raw_a = 0;  // detector records per party
    std::uint64_t raw_b = 0;
    std::uint64_t discarded_a = 0;  // records outside every slot window
    std::uint64_t discarded_b = 0;
    CoincidenceTable table;

    RateWithBar sifted;
    bool qber_defined = false;
    QberEstimate qber_est;
    SecureRate secure;

    std::vector<StabilityPoint> series;  // populated when windows > 1
    Histogram2D histogram;               // populated when the config asks for it
};

struct PublishedReproduction {
    RateWithBar sifted;
    QberEstimate qber_est;
    SecureRate secure;
};

struct RunReport {
    ChannelPlan plan;
    SwitchState net;  // final switch state
    std::vector<std::string> waitlisted;
    std::vector<LinkReport> links;
    std::optional<PublishedReproduction> published;
    std::uint64_t seed = 0;
    double duration_s = 0.0;
    std::uint32_t windows = 1;
    double f_ec = 1.2;
    std::vector<std::string> caveats;
    std::int64_t timestamp_unix_ms = 0;
};

// Validates, plans, routes, simulates every granted link and analyzes the
// result. Deterministic given (config, seed) apart from the timestamp field.
RunReport run_scenario(const ScenarioConfig& cfg);

std::string report_to_json(const RunReport& r);

// report.json, plan.csv, links.csv, and per-link qber_series_<id>.csv /
// histogram_<id>.csv under out_dir (created if missing).
void write_report_files(const RunReport& r, const std::string& out_dir);

}  // namespace qkdnet
