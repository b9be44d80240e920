#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qkdnet/config.hpp"
#include "qkdnet/grid.hpp"
#include "qkdnet/keyrate.hpp"
#include "qkdnet/netalloc.hpp"
#include "qkdnet/photonics.hpp"
#include "qkdnet/quantum.hpp"
#include "qkdnet/scenario.hpp"
#include "qkdnet/timetag.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;
using namespace qkdnet;

double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t idx = 0;
        const double v = std::stod(text, &idx);
        if (idx != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::logic_error&) {
        throw config_error(what + ": expected a number, got '" + text + "'");
    }
}

std::pair<double, double> parse_band(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw config_error("--band-nm expects <lo>:<hi> in nm, got '" + text + "'");
    const double lo = parse_double(text.substr(0, colon), "--band-nm low edge");
    const double hi = parse_double(text.substr(colon + 1), "--band-nm high edge");
    if (lo <= 0 || hi <= 0 || lo >= hi)
        throw config_error("--band-nm requires 0 < lo < hi");
    return {lo, hi};
}

ChannelPlan plan_from_band(double pump_nm, double band_lo_nm, double band_hi_nm,
                           std::int64_t spacing_ghz, double eps_ghz, bool strict_itu) {
    // Longer wavelength = lower frequency, so the nm edges swap.
    return plan_channels(wavelength_to_frequency(pump_nm), wavelength_to_frequency(band_hi_nm),
                         wavelength_to_frequency(band_lo_nm), spacing_ghz, eps_ghz, strict_itu);
}

ordered_json plan_to_json(const ChannelPlan& plan) {
    ordered_json pairs = ordered_json::array();
    for (std::size_t i = 0; i < plan.pairs.size(); ++i) {
        const ConjugatePair& p = plan.pairs[i];
        pairs.push_back({{"pair_id", i},
                         {"signal_ghz", p.signal.center.ghz},
                         {"idler_ghz", p.idler.center.ghz},
                         {"signal_nm", p.signal.center.wavelength_nm()},
                         {"idler_nm", p.idler.center.wavelength_nm()},
                         {"detuning_ghz", p.detuning_ghz}});
    }
    return ordered_json{{"pump_ghz", plan.pump.ghz},
                        {"band_low_ghz", plan.band_low.ghz},
                        {"band_high_ghz", plan.band_high.ghz},
                        {"spacing_ghz", plan.spacing_ghz},
                        {"strict_itu", plan.strict_itu},
                        {"pair_count", plan.pairs.size()},
                        {"pairs", pairs}};
}

ordered_json qber_to_json(const QberEstimate& q) {
    return ordered_json{{"e_h", q.e_h},           {"e_h_bar3", 3.0 * q.sigma_h},
                        {"e_d", q.e_d},           {"e_d_bar3", 3.0 * q.sigma_d},
                        {"n_h", q.n_h},           {"n_d", q.n_d}};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw config_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw config_error("write to '" + path + "' failed");
}

std::string histogram_csv(const Histogram2D& h) {
    std::string csv = "bin_a_ps,bin_b_ps,count\n";
    char line[96];
    for (std::uint32_t a = 0; a < h.bins; ++a)
        for (std::uint32_t b = 0; b < h.bins; ++b) {
            const std::uint64_t c = h.at(a, b);
            if (c == 0) continue;
            std::snprintf(line, sizeof line, "%u,%u,%llu\n", a * kTagResolutionPs,
                          b * kTagResolutionPs, static_cast<unsigned long long>(c));
            csv += line;
        }
    return csv;
}

struct KeyReport {
    CoincidenceTable table;
    RateWithBar sifted;
    bool qber_defined = false;
    QberEstimate q;
    SecureRate secure;
    double t_acq_s = 0.0;
    double f_ec = 1.2;
};

KeyReport analyze_tables(const CoincidenceTable& table, double t_acq_s, double f_ec) {
    KeyReport r;
    r.table = table;
    r.t_acq_s = t_acq_s;
    r.f_ec = f_ec;
    r.sifted = sifted_rate(table, t_acq_s);
    try {
        r.q = qber(table);
        r.qber_defined = true;
        r.secure = secure_rate(r.sifted, r.q, f_ec);
    } catch (const domain_error&) {
        r.secure = SecureRate{0.0, 0.0, true};
    }
    return r;
}

ordered_json key_report_json(const KeyReport& r) {
    ordered_json j;
    j["format"] = "qkdnet-key-report";
    j["version"] = 1;
    j["t_acq_s"] = r.t_acq_s;
    j["f_ec"] = r.f_ec;
    ordered_json cells;
    for (Outcome a : kOutcomes)
        for (Outcome b : kOutcomes)
            cells[std::string(outcome_name(a)) + std::string(outcome_name(b))] = r.table.at(a, b);
    cells["total"] = r.table.total();
    cells["ambiguous_pulses"] = r.table.ambiguous_pulses;
    j["coincidences"] = cells;
    j["sifted_bps"] = r.sifted.bps;
    j["sifted_bar3"] = r.sifted.bar3;
    j["qber"] = r.qber_defined ? qber_to_json(r.q) : ordered_json(nullptr);
    j["secure_bps"] = r.secure.bps;
    j["secure_bar3"] = r.secure.bar3;
    j["below_threshold"] = r.secure.below_threshold;
    return j;
}

void print_key_report(const KeyReport& r) {
    std::printf("%-26s %9.3f +- %.3f (3-sigma)\n", "Sifted key rate (bits/s)", r.sifted.bps,
                r.sifted.bar3);
    if (r.qber_defined) {
        std::printf("%-26s %9.2f +- %.2f (3-sigma)\n", "QBER H/V (%)", 100.0 * r.q.e_h,
                    300.0 * r.q.sigma_h);
        std::printf("%-26s %9.2f +- %.2f (3-sigma)\n", "QBER D/A (%)", 100.0 * r.q.e_d,
                    300.0 * r.q.sigma_d);
    } else {
        std::printf("%-26s %9s\n", "QBER H/V (%)", "n/a");
        std::printf("%-26s %9s\n", "QBER D/A (%)", "n/a");
    }
    std::printf("%-26s %9.3f +- %.3f (3-sigma)%s\n", "Secure key rate (bits/s)", r.secure.bps,
                r.secure.bar3, r.secure.below_threshold ? "  [below threshold]" : "");
    std::printf("%-26s %9.0f\n", "Coincidences (total)", r.table.total());
    std::printf("%-26s %9llu\n", "Ambiguous pulses",
                static_cast<unsigned long long>(r.table.ambiguous_pulses));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qkdnet: DWDM entanglement QKD network simulator and analyzer"};
    app.require_subcommand(1);
    int exit_code = 0;

    // grid plan
    auto* grid_cmd = app.add_subcommand("grid", "ITU-grid channel planning");
    grid_cmd->require_subcommand(1);
    auto* plan_cmd = grid_cmd->add_subcommand("plan", "carve conjugate channel pairs");
    double g_pump_nm = 777.45;
    std::string g_band = "1510:1600";
    std::int64_t g_spacing = 200;
    bool g_strict = false;
    double g_eps = -1.0;
    std::string g_format = "csv";
    std::string g_out;
    plan_cmd->add_option("--pump-nm", g_pump_nm, "pump wavelength in nm")->required();
    plan_cmd->add_option("--band-nm", g_band, "source band as <lo>:<hi> in nm")->required();
    plan_cmd->add_option("--spacing-ghz", g_spacing, "channel spacing: 50, 100 or 200")
        ->required();
    plan_cmd->add_flag("--strict-itu", g_strict, "only officially defined ITU channels");
    plan_cmd->add_option("--eps-ghz", g_eps, "conjugacy tolerance (default spacing/2)");
    plan_cmd->add_option("--format", g_format, "stdout format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    plan_cmd->add_option("--out", g_out, "also write the plan to this file");
    plan_cmd->callback([&] {
        const auto [lo, hi] = parse_band(g_band);
        const ChannelPlan plan = plan_from_band(g_pump_nm, lo, hi, g_spacing, g_eps, g_strict);
        const std::string text = g_format == "json" ? plan_to_json(plan).dump(2) + "\n"
                                                    : channel_plan_csv(plan);
        std::cout << text;
        if (!g_out.empty()) write_text_file(g_out, text);
    });

    // net init/register/connect/disconnect/status
    auto* net_cmd = app.add_subcommand("net", "wavelength-selective switch state");
    net_cmd->require_subcommand(1);
    std::string n_state = "netstate.json";

    auto* init_cmd = net_cmd->add_subcommand("init", "create a switch state from a channel plan");
    double n_pump_nm = 777.45;
    std::string n_band = "1510:1600";
    std::int64_t n_spacing = 200;
    bool n_strict = false;
    double n_eps = -1.0;
    init_cmd->add_option("--state", n_state, "state file path");
    init_cmd->add_option("--pump-nm", n_pump_nm, "pump wavelength in nm");
    init_cmd->add_option("--band-nm", n_band, "source band as <lo>:<hi> in nm");
    init_cmd->add_option("--spacing-ghz", n_spacing, "channel spacing: 50, 100 or 200");
    init_cmd->add_flag("--strict-itu", n_strict, "only officially defined ITU channels");
    init_cmd->add_option("--eps-ghz", n_eps, "conjugacy tolerance (default spacing/2)");
    init_cmd->callback([&] {
        const auto [lo, hi] = parse_band(n_band);
        const SwitchState s =
            make_switch_state(plan_from_band(n_pump_nm, lo, hi, n_spacing, n_eps, n_strict));
        save_switch_state(n_state, s);
        std::cout << "initialized " << n_state << " with " << s.plan.pairs.size()
                  << " channel pairs\n";
    });

    auto* reg_cmd = net_cmd->add_subcommand("register", "register a user");
    std::string r_name;
    reg_cmd->add_option("name", r_name, "user name")->required();
    reg_cmd->add_option("--state", n_state, "state file path");
    reg_cmd->callback([&] {
        SwitchState s = load_switch_state(n_state);
        register_user(s, r_name);
        save_switch_state(n_state, s);
        std::cout << "registered " << r_name << "\n";
    });

    auto* conn_cmd = net_cmd->add_subcommand("connect", "request a link between two users");
    std::string c_a, c_b;
    conn_cmd->add_option("a", c_a, "first user")->required();
    conn_cmd->add_option("b", c_b, "second user")->required();
    conn_cmd->add_option("--state", n_state, "state file path");
    conn_cmd->callback([&] {
        SwitchState s = load_switch_state(n_state);
        const ConnectResult r = connect(s, c_a, c_b);
        save_switch_state(n_state, s);
        if (r.granted) {
            const ConjugatePair& p = s.plan.pairs[r.pair_id];
            std::printf("granted pair %llu: signal %.4f nm -> %s, idler %.4f nm -> %s\n",
                        static_cast<unsigned long long>(r.pair_id),
                        p.signal.center.wavelength_nm(), c_a.c_str(),
                        p.idler.center.wavelength_nm(), c_b.c_str());
        } else {
            std::cout << "waitlisted: no free channel pair\n";
        }
    });

    auto* disc_cmd = net_cmd->add_subcommand("disconnect", "tear down a link by pair id");
    std::uint64_t d_pair = 0;
    disc_cmd->add_option("pair-id", d_pair, "pair id to release")->required();
    disc_cmd->add_option("--state", n_state, "state file path");
    disc_cmd->callback([&] {
        SwitchState s = load_switch_state(n_state);
        const std::vector<Link> granted = disconnect(s, d_pair);
        save_switch_state(n_state, s);
        std::cout << "released pair " << d_pair << "\n";
        for (const Link& l : granted)
            std::cout << "granted waitlisted pair " << l.pair_id << ": " << l.user_a << " <-> "
                      << l.user_b << "\n";
    });

    auto* stat_cmd = net_cmd->add_subcommand("status", "print the switch state");
    stat_cmd->add_option("--state", n_state, "state file path");
    stat_cmd->callback([&] {
        const SwitchState s = load_switch_state(n_state);
        const SwitchStatus st = status(s);
        ordered_json links = ordered_json::array();
        for (const Link& l : st.links)
            links.push_back({{"pair_id", l.pair_id},
                             {"user_a", l.user_a},
                             {"user_b", l.user_b},
                             {"established_at", l.established_at}});
        ordered_json waits = ordered_json::array();
        for (const WaitEntry& w : st.waitlist)
            waits.push_back(
                {{"user_a", w.user_a}, {"user_b", w.user_b}, {"requested_at", w.requested_at}});
        const ordered_json j{{"users", st.user_count},
                             {"links", links},
                             {"free_pairs", st.free_pairs},
                             {"waitlist", waits}};
        std::cout << j.dump(2) << "\n";
    });

    // state metrics
    auto* state_cmd = app.add_subcommand("state", "two-qubit state analysis");
    state_cmd->require_subcommand(1);
    auto* metrics_cmd = state_cmd->add_subcommand("metrics", "fidelity, tangle, intrinsic QBER");
    std::string m_file;
    metrics_cmd->add_option("--file", m_file, "density-matrix text file")->required();
    metrics_cmd->callback([&] {
        const TwoQubitState s = load_state_file(m_file);
        s.validate();
        CoincidenceTable t;
        const auto p = probability_table(s);
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) t.counts[a][b] = p[a][b];
        const QberEstimate q = qber(t);
        const ordered_json j{{"fidelity", fidelity_to_psi_plus(s)},
                             {"tangle", tangle(s)},
                             {"e_h_intrinsic", q.e_h},
                             {"e_d_intrinsic", q.e_d}};
        std::cout << j.dump(2) << "\n";
    });

    // sim run
    auto* sim_cmd = app.add_subcommand("sim", "Monte Carlo detector-event simulation");
    sim_cmd->require_subcommand(1);
    auto* simrun_cmd = sim_cmd->add_subcommand("run", "simulate a run and write a tag file");
    std::string s_config, s_out;
    simrun_cmd->add_option("--config", s_config, "INI config file")->required();
    simrun_cmd->add_option("--out", s_out, "output .qtt tag file")->required();
    simrun_cmd->callback([&] {
        const SimConfig cfg = load_sim_config(s_config);
        const TagStream stream = simulate_run(cfg.source, cfg.alice, cfg.bob, cfg.analyzer,
                                              cfg.duration_s, cfg.seed);
        write_tag_file(s_out, stream);
        const ordered_json j{{"records", stream.records.size()},
                             {"duration_s", cfg.duration_s},
                             {"sync_rate_millihz", stream.sync_rate_millihz},
                             {"seed", cfg.seed},
                             {"out", s_out}};
        std::cout << j.dump(2) << "\n";
    });

    // keys histogram / analyze
    auto* keys_cmd = app.add_subcommand("keys", "time-tag analysis and key rates");
    keys_cmd->require_subcommand(1);

    auto* hist_cmd = keys_cmd->add_subcommand("histogram", "2D arrival-time histogram CSV");
    std::string h_a, h_b, h_out;
    hist_cmd->add_option("--a", h_a, "party A tag file")->required();
    hist_cmd->add_option("--b", h_b, "party B tag file")->required();
    hist_cmd->add_option("--out", h_out, "output CSV path")->required();
    hist_cmd->callback([&] {
        const TagStream a = read_tag_file(h_a);
        const TagStream b = h_b == h_a ? a : read_tag_file(h_b);
        const Histogram2D h = histogram2d(a, b);
        write_text_file(h_out, histogram_csv(h));
        std::cout << "wrote " << h_out << " (" << h.total << " event pairs)\n";
    });

    auto* an_cmd = keys_cmd->add_subcommand("analyze", "QBER and key rates from tag files");
    std::string a_a, a_b, a_out;
    double a_tacq = 0.0, a_fec = 1.2;
    bool a_json = false;
    an_cmd->add_option("--a", a_a, "party A tag file")->required();
    an_cmd->add_option("--b", a_b, "party B tag file")->required();
    an_cmd->add_option("--t-acq", a_tacq, "acquisition time in seconds")->required();
    an_cmd->add_option("--f-ec", a_fec, "error-correction inefficiency");
    an_cmd->add_flag("--json", a_json, "print the JSON report instead of the table");
    an_cmd->add_option("--out", a_out, "also write the JSON report to this file");
    an_cmd->callback([&] {
        if (a_tacq <= 0) throw config_error("--t-acq must be positive");
        if (a_fec < 1) throw config_error("--f-ec must be at least 1");
        const TagStream sa = read_tag_file(a_a);
        const TagStream sb = a_b == a_a ? sa : read_tag_file(a_b);
        const AnalyzerMap analyzer;
        analyzer.validate(sa.period_ps());
        const BinnedStream ba = bin_outcomes(sa, Party::A, analyzer);
        const BinnedStream bb = bin_outcomes(sb, Party::B, analyzer);
        const KeyReport r = analyze_tables(coincidences(ba, bb), a_tacq, a_fec);
        const ordered_json j = key_report_json(r);
        if (a_json)
            std::cout << j.dump(2) << "\n";
        else
            print_key_report(r);
        if (!a_out.empty()) write_text_file(a_out, j.dump(2) + "\n");
    });

    // scenario improve
    auto* scen_cmd = app.add_subcommand("scenario", "improvement projections");
    scen_cmd->require_subcommand(1);
    auto* imp_cmd = scen_cmd->add_subcommand("improve", "project upgraded secure rates");
    std::string i_base, i_factors;
    std::uint32_t i_channels = 1;
    double i_base_bps = -1.0;
    imp_cmd->add_option("--base", i_base, "base report JSON (key report or run report)");
    imp_cmd->add_option("--base-bps", i_base_bps, "base secure rate, overrides --base");
    imp_cmd->add_option("--factors", i_factors, "comma list from dual,splice,eff,rep");
    imp_cmd->add_option("--channels", i_channels, "channel count for the aggregate");
    imp_cmd->callback([&] {
        double base = i_base_bps;
        if (base < 0) {
            if (i_base.empty())
                throw config_error("scenario improve needs --base or --base-bps");
            std::ifstream f(i_base);
            if (!f) throw config_error("cannot open '" + i_base + "'");
            ordered_json j;
            try {
                f >> j;
            } catch (const nlohmann::json::exception& e) {
                throw format_error("'" + i_base + "' is not valid JSON: " + e.what());
            }
            if (j.contains("secure_bps"))
                base = j["secure_bps"].get<double>();
            else if (j.contains("published_reproduction") &&
                     j["published_reproduction"].is_object())
                base = j["published_reproduction"]["secure_bps"].get<double>();
            else if (j.contains("links") && j["links"].is_array() && !j["links"].empty())
                base = j["links"][0]["secure_bps"].get<double>();
            else
                throw format_error("'" + i_base + "' carries no secure_bps field");
        }
        ImprovementScenario s;
        s.channels = i_channels;
        std::stringstream ss(i_factors);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            if (tok == "dual")
                s.dual_detectors = true;
            else if (tok == "splice")
                s.splice_loss = true;
            else if (tok == "eff")
                s.detector_efficiency = true;
            else if (tok == "rep")
                s.rep_rate = true;
            else
                throw config_error("unknown factor '" + tok +
                                   "' (expected dual, splice, eff or rep)");
        }
        const Projection p = project_scenario(base, s);
        const ordered_json j{{"base_bps", base},
                             {"factor", p.factor},
                             {"per_channel_bps", p.per_channel_bps},
                             {"channels", s.channels},
                             {"aggregate_bps", p.aggregate_bps}};
        std::cout << j.dump(2) << "\n";
    });

    // run
    auto* run_cmd = app.add_subcommand("run", "full scenario: plan, route, simulate, analyze");
    std::string run_config, run_out_dir;
    std::uint64_t run_seed = 0;
    bool run_validate = false;
    run_cmd->add_option("--config", run_config, "scenario INI config")->required();
    auto* seed_opt = run_cmd->add_option("--seed", run_seed, "override the config seed");
    auto* outdir_opt = run_cmd->add_option("--out-dir", run_out_dir, "override the output dir");
    run_cmd->add_flag("--validate", run_validate, "list diagnostics and exit");
    run_cmd->callback([&] {
        ScenarioConfig cfg = load_scenario_config(run_config);
        if (seed_opt->count()) cfg.seed = run_seed;
        if (outdir_opt->count()) cfg.out_dir = run_out_dir;
        if (run_validate) {
            const auto diagnostics = validate_scenario(cfg);
            for (const auto& d : diagnostics) std::cout << d << "\n";
            if (!diagnostics.empty()) exit_code = 1;
            return;
        }
        const RunReport report = run_scenario(cfg);
        if (cfg.out_dir.empty()) {
            std::cout << report_to_json(report);
            return;
        }
        write_report_files(report, cfg.out_dir);
        for (const LinkReport& lr : report.links) {
            std::printf("pair %llu %s<->%s: sifted %.2f bits/s",
                        static_cast<unsigned long long>(lr.pair_id), lr.user_a.c_str(),
                        lr.user_b.c_str(), lr.sifted.bps);
            if (lr.qber_defined)
                std::printf(", QBER H/V %.2f%% D/A %.2f%%", 100.0 * lr.qber_est.e_h,
                            100.0 * lr.qber_est.e_d);
            std::printf(", secure %.2f bits/s%s\n", lr.secure.bps,
                        lr.secure.below_threshold ? " [below threshold]" : "");
        }
        for (const std::string& w : report.waitlisted) std::cout << "waitlisted: " << w << "\n";
        std::cout << "wrote " << cfg.out_dir << "/report.json\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const request_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
