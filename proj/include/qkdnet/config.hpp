#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkdnet/errors.hpp"
#include "qkdnet/photonics.hpp"

namespace qkdnet {

// Minimal INI reader: [section] headers, key = value lines, '#'/';' comments.
// Duplicate sections or keys are configuration errors.
struct Ini {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static Ini parse(std::istream& in, const std::string& origin);
    static Ini parse_file(const std::string& path);
};

struct SimConfig {
    SourceParams source;
    ArmParams alice;
    ArmParams bob;
    AnalyzerMap analyzer;
    double duration_s = 500.0;
    std::uint64_t seed = 1;
};

SimConfig load_sim_config(const std::string& path);

struct LinkSpec {
    std::string user_a;
    std::string user_b;
    SourceParams source;
    ArmParams alice;
    ArmParams bob;
};

struct PublishedValues {
    double sifted_bps = 0.0;
    double e_h_pct = 0.0;
    double e_d_pct = 0.0;
    double bar3_h_pct = 0.0;  // 0: derive binomially
    double bar3_d_pct = 0.0;
};

struct ScenarioConfig {
    double pump_nm = 777.45;
    double band_lo_nm = 1510.0;
    double band_hi_nm = 1600.0;
    std::int64_t spacing_ghz = 200;
    bool strict_itu = false;
    double eps_conj_ghz = -1.0;  // negative: spacing/2

    std::vector<std::string> users;
    std::vector<LinkSpec> links;
    AnalyzerMap analyzer;

    double duration_s = 500.0;
    std::uint64_t seed = 1;
    std::uint32_t windows = 1;
    double f_ec = 1.2;

    std::optional<PublishedValues> published;

    std::string out_dir;         // empty: no files written
    bool emit_histogram = true;  // 2D histogram CSV per link
};

ScenarioConfig load_scenario_config(const std::string& path);

// Collects every violated invariant as a human-readable diagnostic naming the
// offending section and key; an empty list means the config can run.
std::vector<std::string> validate_scenario(const ScenarioConfig& cfg);

}  // namespace qkdnet
