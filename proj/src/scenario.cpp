#include "qkdnet/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "qkdnet/rng.hpp"

namespace qkdnet {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kLinkSalt = 0x6c696e6bULL;  // per-link substream domain tag

struct LinkAccumulator {
    CoincidenceTable table;
    std::uint64_t raw_a = 0, raw_b = 0;
    std::uint64_t discarded_a = 0, discarded_b = 0;
    std::vector<StabilityPoint> series;
    Histogram2D histogram;
    bool histogram_on = false;

    void merge_table(const CoincidenceTable& t) {
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) table.counts[a][b] += t.counts[a][b];
        table.ambiguous_pulses += t.ambiguous_pulses;
    }

    void merge_histogram(const Histogram2D& h) {
        if (histogram.bins == 0) {
            histogram = h;
            return;
        }
        for (std::size_t i = 0; i < h.counts.size(); ++i) histogram.counts[i] += h.counts[i];
        histogram.total += h.total;
    }
};

LinkReport simulate_link(const ScenarioConfig& cfg, const LinkSpec& spec,
                         const ConjugatePair& pair, std::uint64_t pair_id) {
    LinkReport rep;
    rep.pair_id = pair_id;
    rep.user_a = spec.user_a;
    rep.user_b = spec.user_b;
    rep.signal_nm = pair.signal.center.wavelength_nm();
    rep.idler_nm = pair.idler.center.wavelength_nm();
    rep.detuning_ghz = pair.detuning_ghz;
    rep.analytic = analytic_rates(spec.source, spec.alice, spec.bob, cfg.analyzer);

    const std::uint64_t link_seed = derive_seed(cfg.seed, kLinkSalt, pair_id);
    const std::uint64_t total_pulses = pulses_in(cfg.duration_s, spec.source.rep_rate_hz);
    const std::uint64_t n_windows = std::min<std::uint64_t>(cfg.windows, total_pulses);
    const std::uint64_t quot = n_windows ? total_pulses / n_windows : 0;
    const std::uint64_t rem = n_windows ? total_pulses % n_windows : 0;

    LinkAccumulator acc;
    acc.histogram_on = cfg.emit_histogram;
    std::uint64_t lo = 0;
    for (std::uint64_t w = 0; w < n_windows; ++w) {
        const std::uint64_t len = quot + (w < rem ? 1 : 0);
        const std::uint64_t hi = lo + len;
        const TagStream stream = simulate_pulses(spec.source, spec.alice, spec.bob, cfg.analyzer,
                                                 lo, len, link_seed);
        const BinnedStream ba = bin_outcomes(stream, Party::A, cfg.analyzer);
        const BinnedStream bb = bin_outcomes(stream, Party::B, cfg.analyzer);
        for (const TagRecord& r : stream.records)
            (r.party == Party::A ? acc.raw_a : acc.raw_b) += 1;
        acc.discarded_a += ba.discarded;
        acc.discarded_b += bb.discarded;
        const CoincidenceTable t = coincidences(ba, bb);
        acc.merge_table(t);
        if (acc.histogram_on) acc.merge_histogram(histogram2d(stream, stream));
        if (n_windows > 1) {
            StabilityPoint pt;
            pt.window_index = w;
            pt.t_start_s = static_cast<double>(lo) / spec.source.rep_rate_hz;
            pt.t_end_s = static_cast<double>(hi) / spec.source.rep_rate_hz;
            try {
                pt.q = qber(t);
            } catch (const domain_error&) {
                pt.empty = true;
            }
            acc.series.push_back(pt);
        }
        lo = hi;
    }

    rep.raw_a = acc.raw_a;
    rep.raw_b = acc.raw_b;
    rep.discarded_a = acc.discarded_a;
    rep.discarded_b = acc.discarded_b;
    rep.table = acc.table;
    rep.series = std::move(acc.series);
    rep.histogram = std::move(acc.histogram);

    rep.sifted = sifted_rate(rep.table, cfg.duration_s);
    try {
        rep.qber_est = qber(rep.table);
        rep.qber_defined = true;
        rep.secure = secure_rate(rep.sifted, rep.qber_est, cfg.f_ec);
    } catch (const domain_error&) {
        rep.secure = SecureRate{0.0, 0.0, true};
    }
    return rep;
}

ordered_json qber_json(const QberEstimate& q) {
    return ordered_json{{"e_h", q.e_h},           {"e_h_bar3", 3.0 * q.sigma_h},
                        {"e_d", q.e_d},           {"e_d_bar3", 3.0 * q.sigma_d},
                        {"n_h", q.n_h},           {"n_d", q.n_d}};
}

ordered_json table_json(const CoincidenceTable& t) {
    ordered_json cells;
    for (Outcome a : kOutcomes)
        for (Outcome b : kOutcomes)
            cells[std::string(outcome_name(a)) + std::string(outcome_name(b))] = t.at(a, b);
    cells["total"] = t.total();
    cells["ambiguous_pulses"] = t.ambiguous_pulses;
    return cells;
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg) {
    const auto diagnostics = validate_scenario(cfg);
    if (!diagnostics.empty()) {
        std::string msg = "configuration is invalid:";
        for (const auto& d : diagnostics) msg += "\n  " + d;
        throw config_error(msg);
    }

    RunReport report;
    report.seed = cfg.seed;
    report.duration_s = cfg.duration_s;
    report.windows = cfg.windows;
    report.f_ec = cfg.f_ec;
    report.caveats.push_back(
        "Security rates assume fair sampling; detector side channels are not modeled.");

    report.plan = plan_channels(wavelength_to_frequency(cfg.pump_nm),
                                wavelength_to_frequency(cfg.band_hi_nm),
                                wavelength_to_frequency(cfg.band_lo_nm), cfg.spacing_ghz,
                                cfg.eps_conj_ghz, cfg.strict_itu);

    SwitchState net = make_switch_state(report.plan);
    for (const auto& u : cfg.users) register_user(net, u);

    std::vector<std::pair<std::uint64_t, const LinkSpec*>> granted;
    for (const LinkSpec& spec : cfg.links) {
        const ConnectResult r = connect(net, spec.user_a, spec.user_b);
        if (r.granted)
            granted.emplace_back(r.pair_id, &spec);
        else
            report.waitlisted.push_back(spec.user_a + ":" + spec.user_b);
    }

    for (const auto& [pair_id, spec] : granted)
        report.links.push_back(
            simulate_link(cfg, *spec, report.plan.pairs[pair_id], pair_id));
    std::sort(report.links.begin(), report.links.end(),
              [](const LinkReport& a, const LinkReport& b) { return a.pair_id < b.pair_id; });

    report.net = std::move(net);

    if (cfg.published) {
        const PublishedValues& pv = *cfg.published;
        PublishedReproduction pub;
        pub.sifted = published_sifted(pv.sifted_bps, cfg.duration_s);
        pub.qber_est = published_qber(pv.e_h_pct / 100.0, pv.e_d_pct / 100.0, pv.sifted_bps,
                                      cfg.duration_s, pv.bar3_h_pct / 100.0,
                                      pv.bar3_d_pct / 100.0);
        pub.secure = secure_rate(pub.sifted, pub.qber_est, cfg.f_ec);
        report.published = pub;
    }

    report.timestamp_unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count();
    return report;
}

std::string report_to_json(const RunReport& r) {
    ordered_json j;
    j["format"] = "qkdnet-run-report";
    j["version"] = 1;
    j["timestamp_unix_ms"] = r.timestamp_unix_ms;
    j["seed"] = r.seed;
    j["duration_s"] = r.duration_s;
    j["windows"] = r.windows;
    j["f_ec"] = r.f_ec;
    j["caveats"] = r.caveats;

    ordered_json pairs = ordered_json::array();
    for (std::size_t i = 0; i < r.plan.pairs.size(); ++i) {
        const ConjugatePair& p = r.plan.pairs[i];
        pairs.push_back({{"pair_id", i},
                         {"signal_ghz", p.signal.center.ghz},
                         {"idler_ghz", p.idler.center.ghz},
                         {"signal_nm", p.signal.center.wavelength_nm()},
                         {"idler_nm", p.idler.center.wavelength_nm()},
                         {"detuning_ghz", p.detuning_ghz}});
    }
    j["plan"] = {{"pump_ghz", r.plan.pump.ghz},
                 {"band_low_ghz", r.plan.band_low.ghz},
                 {"band_high_ghz", r.plan.band_high.ghz},
                 {"spacing_ghz", r.plan.spacing_ghz},
                 {"strict_itu", r.plan.strict_itu},
                 {"pair_count", r.plan.pairs.size()},
                 {"pairs", pairs}};

    ordered_json links = ordered_json::array();
    for (const Link& l : r.net.links)
        links.push_back({{"pair_id", l.pair_id},
                         {"user_a", l.user_a},
                         {"user_b", l.user_b},
                         {"established_at", l.established_at}});
    j["network"] = {{"users", r.net.users},
                    {"links", links},
                    {"waitlisted", r.waitlisted},
                    {"free_pairs", r.net.free_pairs().size()}};

    if (r.published) {
        const PublishedReproduction& p = *r.published;
        j["published_reproduction"] = {
            {"sifted_bps", p.sifted.bps},
            {"sifted_bar3", p.sifted.bar3},
            {"qber", qber_json(p.qber_est)},
            {"secure_bps", p.secure.bps},
            {"secure_bar3", p.secure.bar3},
            {"below_threshold", p.secure.below_threshold}};
    } else {
        j["published_reproduction"] = nullptr;
    }

    ordered_json out_links = ordered_json::array();
    for (const LinkReport& lr : r.links) {
        ordered_json lj;
        lj["pair_id"] = lr.pair_id;
        lj["user_a"] = lr.user_a;
        lj["user_b"] = lr.user_b;
        lj["signal_nm"] = lr.signal_nm;
        lj["idler_nm"] = lr.idler_nm;
        lj["detuning_ghz"] = lr.detuning_ghz;
        lj["analytic"] = {{"singles_a_hz", lr.analytic.singles_a_hz},
                          {"singles_b_hz", lr.analytic.singles_b_hz},
                          {"coincidence_hz", lr.analytic.coincidence_hz},
                          {"accidental_hz", lr.analytic.accidental_hz},
                          {"sifted_hz", lr.analytic.sifted_hz}};
        lj["counters"] = {{"raw_a", lr.raw_a},
                          {"raw_b", lr.raw_b},
                          {"discarded_a", lr.discarded_a},
                          {"discarded_b", lr.discarded_b}};
        lj["coincidences"] = table_json(lr.table);
        lj["sifted_bps"] = lr.sifted.bps;
        lj["sifted_bar3"] = lr.sifted.bar3;
        lj["qber"] = lr.qber_defined ? qber_json(lr.qber_est) : ordered_json(nullptr);
        lj["secure_bps"] = lr.secure.bps;
        lj["secure_bar3"] = lr.secure.bar3;
        lj["below_threshold"] = lr.secure.below_threshold;
        if (!lr.series.empty()) {
            ordered_json series = ordered_json::array();
            for (const StabilityPoint& pt : lr.series) {
                ordered_json pj{{"window", pt.window_index},
                                {"t_start_s", pt.t_start_s},
                                {"t_end_s", pt.t_end_s},
                                {"empty", pt.empty}};
                pj["qber"] = pt.empty ? ordered_json(nullptr) : qber_json(pt.q);
                series.push_back(pj);
            }
            lj["qber_series"] = series;
        }
        out_links.push_back(lj);
    }
    j["links"] = out_links;
    return j.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw config_error("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw config_error("write to '" + path.string() + "' failed");
}

}  // namespace

void write_report_files(const RunReport& r, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    write_text(dir / "report.json", report_to_json(r));
    write_text(dir / "plan.csv", channel_plan_csv(r.plan));

    std::string links = "pair_id,user_a,user_b,sifted_bps,sifted_bar3,e_h,e_h_bar3,e_d,e_d_bar3,"
                        "secure_bps,secure_bar3,below_threshold\n";
    char line[320];
    for (const LinkReport& lr : r.links) {
        std::snprintf(line, sizeof line,
                      "%llu,%s,%s,%.6f,%.6f,%.8f,%.8f,%.8f,%.8f,%.6f,%.6f,%d\n",
                      static_cast<unsigned long long>(lr.pair_id), lr.user_a.c_str(),
                      lr.user_b.c_str(), lr.sifted.bps, lr.sifted.bar3,
                      lr.qber_defined ? lr.qber_est.e_h : -1.0,
                      lr.qber_defined ? 3.0 * lr.qber_est.sigma_h : -1.0,
                      lr.qber_defined ? lr.qber_est.e_d : -1.0,
                      lr.qber_defined ? 3.0 * lr.qber_est.sigma_d : -1.0, lr.secure.bps,
                      lr.secure.bar3, lr.secure.below_threshold ? 1 : 0);
        links += line;
    }
    write_text(dir / "links.csv", links);

    for (const LinkReport& lr : r.links) {
        if (!lr.series.empty()) {
            std::string csv =
                "window,t_start_s,t_end_s,e_h,sigma_h,e_d,sigma_d,n_h,n_d,empty\n";
            for (const StabilityPoint& pt : lr.series) {
                if (pt.empty)
                    std::snprintf(line, sizeof line, "%zu,%.3f,%.3f,,,,,,,1\n", pt.window_index,
                                  pt.t_start_s, pt.t_end_s);
                else
                    std::snprintf(line, sizeof line,
                                  "%zu,%.3f,%.3f,%.8f,%.8f,%.8f,%.8f,%.0f,%.0f,0\n",
                                  pt.window_index, pt.t_start_s, pt.t_end_s, pt.q.e_h,
                                  pt.q.sigma_h, pt.q.e_d, pt.q.sigma_d, pt.q.n_h, pt.q.n_d);
                csv += line;
            }
            write_text(dir / ("qber_series_" + std::to_string(lr.pair_id) + ".csv"), csv);
        }
        if (lr.histogram.bins != 0) {
            std::string csv = "bin_a_ps,bin_b_ps,count\n";
            for (std::uint32_t a = 0; a < lr.histogram.bins; ++a)
                for (std::uint32_t b = 0; b < lr.histogram.bins; ++b) {
                    const std::uint64_t c = lr.histogram.at(a, b);
                    if (c == 0) continue;
                    std::snprintf(line, sizeof line, "%u,%u,%llu\n", a * kTagResolutionPs,
                                  b * kTagResolutionPs, static_cast<unsigned long long>(c));
                    csv += line;
                }
            write_text(dir / ("histogram_" + std::to_string(lr.pair_id) + ".csv"), csv);
        }
    }
}

}  // namespace qkdnet
