#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "qkdnet/scenario.hpp"

using namespace qkdnet;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream f(path, std::ios::trunc);
    f << content;
    f.close();
    return path.string();
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

std::string diag_text(const std::vector<std::string>& diag) {
    std::string all;
    for (const auto& d : diag) all += d + "\n";
    return all;
}

// Two short low-loss links so coincidence counts are large at 20 ms.
ScenarioConfig tiny_scenario() {
    ScenarioConfig cfg;
    cfg.users = {"alice", "bob", "carol", "dave"};
    LinkSpec ab;
    ab.user_a = "alice";
    ab.user_b = "bob";
    ab.source.mu = 4e-3;
    ab.source.state = make_colored_noise_state(0.978);
    ab.alice.loss_db = 3.0;
    ab.bob.loss_db = 3.0;
    LinkSpec cd = ab;
    cd.user_a = "carol";
    cd.user_b = "dave";
    cd.source.mu = 2e-3;
    cd.source.state = make_colored_noise_state(0.9);
    cfg.links = {ab, cd};
    cfg.duration_s = 0.02;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("ini parser handles comments, trimming and reports error locations") {
    std::istringstream in(
        "# leading comment\n"
        "[source]\n"
        "mu = 0.004   ; trailing comment\n"
        "  state=psi_plus\n"
        "\n"
        "[run]\n"
        "seed = 7\n");
    const Ini ini = Ini::parse(in, "test");
    CHECK(ini.sections.at("source").at("mu") == "0.004");
    CHECK(ini.sections.at("source").at("state") == "psi_plus");
    CHECK(ini.sections.at("run").at("seed") == "7");

    const auto expect_error = [](const std::string& text, const std::string& fragment) {
        std::istringstream bad(text);
        try {
            (void)Ini::parse(bad, "test");
            FAIL("parse accepted malformed input: ", fragment);
        } catch (const config_error& e) {
            CHECK_MESSAGE(contains(e.what(), fragment), e.what());
        }
    };

    expect_error("[a]\n[a]\n", "test:2: duplicate section");
    expect_error("[a]\nk = 1\nk = 2\n", "test:3: duplicate key");
    expect_error("k = 1\n", "test:1: key outside any section");
    expect_error("[a\n", "test:1: unterminated section");
    expect_error("[]\n", "test:1: empty section name");
    expect_error("[a]\nno equals sign\n", "test:2: expected key = value");
    expect_error("[a]\n= 1\n", "test:2: empty key");

    CHECK_THROWS_AS((void)Ini::parse_file("/nonexistent.cfg"), config_error);
}

TEST_CASE("sim config loads typed values with unit conversions") {
    const std::string path = write_temp("qkdnet_sim.cfg",
                                        "[source]\n"
                                        "rep_rate_hz = 81.6e6\n"
                                        "mu = 8.9e-3\n"
                                        "state = colored_noise\n"
                                        "visibility = 0.9\n"
                                        "[alice]\n"
                                        "loss_db = 19.4\n"
                                        "dark_rate_hz = 200\n"
                                        "dead_time_ns = 50\n"
                                        "jitter_ps = 120\n"
                                        "misalign_deg = 18\n"
                                        "[analyzer]\n"
                                        "slots_ns = 0, 2.5, 5.0, 7.5\n"
                                        "slot_width_ns = 1.0\n"
                                        "[run]\n"
                                        "duration_s = 500\n"
                                        "seed = 42\n");
    const SimConfig cfg = load_sim_config(path);
    CHECK(cfg.source.rep_rate_hz == doctest::Approx(81.6e6));
    CHECK(cfg.source.mu == doctest::Approx(8.9e-3));
    CHECK(fidelity_to_psi_plus(cfg.source.state) == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(cfg.alice.loss_db == doctest::Approx(19.4));
    CHECK(cfg.alice.dark_rate_hz == doctest::Approx(200.0));
    CHECK(cfg.alice.dead_time_s == doctest::Approx(50e-9));
    CHECK(cfg.alice.jitter_sigma_s == doctest::Approx(120e-12));
    CHECK(cfg.alice.misalign_rad == doctest::Approx(18.0 * 3.14159265358979 / 180.0));
    CHECK(cfg.bob.loss_db == 0.0);            // absent section keeps defaults
    CHECK(cfg.bob.jitter_sigma_s == doctest::Approx(100e-12));
    CHECK(cfg.analyzer.slot_offset_ps[1] == doctest::Approx(2500.0));
    CHECK(cfg.analyzer.slot_width_ps == doctest::Approx(1000.0));
    CHECK(cfg.duration_s == 500.0);
    CHECK(cfg.seed == 42);

    const std::string unknown_key = write_temp("qkdnet_sim_badkey.cfg",
                                               "[run]\nduration_s = 1\nbogus = 2\n");
    CHECK_THROWS_AS((void)load_sim_config(unknown_key), config_error);

    const std::string unknown_section =
        write_temp("qkdnet_sim_badsec.cfg", "[run]\nseed = 1\n[extra]\nx = 1\n");
    CHECK_THROWS_AS((void)load_sim_config(unknown_section), config_error);

    const std::string bad_number =
        write_temp("qkdnet_sim_badnum.cfg", "[source]\nmu = fast\n");
    CHECK_THROWS_AS((void)load_sim_config(bad_number), config_error);
}

TEST_CASE("state selection in configs") {
    const auto load_state = [](const std::string& body) {
        const std::string path = write_temp("qkdnet_state.cfg", "[source]\n" + body);
        return load_sim_config(path).source.state;
    };

    CHECK(fidelity_to_psi_plus(load_state("state = psi_plus\n")) == doctest::Approx(1.0));
    CHECK(tangle(load_state("state = werner\np = 0.9\n")) ==
          doctest::Approx(0.7225).epsilon(1e-9));
    CHECK(fidelity_to_psi_plus(load_state("state = file\nfile = configs/psi_plus_state.txt\n")) ==
          doctest::Approx(1.0).epsilon(1e-12));

    const auto expect_bad = [&](const std::string& body) {
        const std::string path = write_temp("qkdnet_state_bad.cfg", "[source]\n" + body);
        CHECK_THROWS_AS((void)load_sim_config(path), config_error);
    };
    expect_bad("state = psi_plus\nvisibility = 0.9\n");
    expect_bad("state = colored_noise\n");
    expect_bad("state = werner\n");
    expect_bad("state = file\n");
    expect_bad("state = ghz\n");
}

TEST_CASE("bundled configs load and validate cleanly") {
    for (const char* name :
         {"configs/table1_col1.cfg", "configs/table1_col2.cfg", "configs/table1_col3.cfg",
          "configs/fig4.cfg", "configs/multi_link.cfg"}) {
        CAPTURE(name);
        const ScenarioConfig cfg = load_scenario_config(name);
        const auto diag = validate_scenario(cfg);
        CHECK_MESSAGE(diag.empty(), diag_text(diag));
    }
    CHECK_NOTHROW((void)load_sim_config("configs/sim_col1.cfg"));
}

TEST_CASE("scenario validation names the offending field") {
    ScenarioConfig cfg = tiny_scenario();
    CHECK(validate_scenario(cfg).empty());

    cfg.spacing_ghz = 150;
    CHECK(contains(diag_text(validate_scenario(cfg)), "[grid] spacing_ghz"));
    cfg.spacing_ghz = 200;

    cfg.links[0].user_b = "alice";
    CHECK(contains(diag_text(validate_scenario(cfg)), "linked with itself"));
    cfg.links[0].user_b = "bob";

    cfg.links[0].user_b = "ghost";
    CHECK(contains(diag_text(validate_scenario(cfg)), "unknown user 'ghost'"));
    cfg.links[0].user_b = "bob";

    cfg.users.push_back("alice");
    CHECK(contains(diag_text(validate_scenario(cfg)), "duplicate user 'alice'"));
    cfg.users.pop_back();

    cfg.links[1].user_a = "alice";
    CHECK(contains(diag_text(validate_scenario(cfg)), "multiple requests"));
    cfg.links[1].user_a = "carol";

    cfg.duration_s = 0.0;
    CHECK(contains(diag_text(validate_scenario(cfg)), "[run] duration_s"));
    cfg.duration_s = 0.02;

    cfg.windows = 0;
    CHECK(contains(diag_text(validate_scenario(cfg)), "[run] windows"));
    cfg.windows = 1;

    cfg.f_ec = 0.9;
    CHECK(contains(diag_text(validate_scenario(cfg)), "[run] f_ec"));
    cfg.f_ec = 1.2;

    cfg.links[0].source.mu = -1.0;
    CHECK(contains(diag_text(validate_scenario(cfg)), "mu must be non-negative"));
    cfg.links[0].source.mu = 4e-3;

    PublishedValues pv;
    pv.sifted_bps = 32.5;
    pv.e_h_pct = 150.0;
    cfg.published = pv;
    CHECK(contains(diag_text(validate_scenario(cfg)), "[published] e_h_pct"));
    cfg.published.reset();

    // More links than conjugate channel pairs can never all be served.
    ScenarioConfig crowded = tiny_scenario();
    crowded.users.clear();
    crowded.links.clear();
    for (int i = 0; i < 56; ++i) crowded.users.push_back("u" + std::to_string(i));
    for (int i = 0; i < 28; ++i) {
        LinkSpec l;
        l.user_a = "u" + std::to_string(2 * i);
        l.user_b = "u" + std::to_string(2 * i + 1);
        l.source.mu = 1e-3;
        crowded.links.push_back(l);
    }
    CHECK(contains(diag_text(validate_scenario(crowded)), "channel pairs"));

    CHECK_THROWS_AS((void)run_scenario(crowded), config_error);
    try {
        (void)run_scenario(crowded);
    } catch (const config_error& e) {
        CHECK(contains(e.what(), "channel pairs"));
    }
}

TEST_CASE("scenario files support per-link overrides") {
    const std::string path = write_temp("qkdnet_scenario.cfg",
                                        "[grid]\n"
                                        "pump_nm = 777.45\n"
                                        "band_nm = 1510:1600\n"
                                        "spacing_ghz = 200\n"
                                        "[network]\n"
                                        "users = a, b, c, d\n"
                                        "links = a:b, c:d\n"
                                        "[source]\n"
                                        "rep_rate_hz = 81.6e6\n"
                                        "mu = 4e-3\n"
                                        "state = colored_noise\n"
                                        "visibility = 0.978\n"
                                        "[alice]\n"
                                        "loss_db = 3\n"
                                        "[bob]\n"
                                        "loss_db = 3\n"
                                        "[link c:d]\n"
                                        "mu = 2e-3\n"
                                        "visibility = 0.9\n"
                                        "loss_a_db = 1.5\n"
                                        "loss_b_db = 2.5\n"
                                        "[run]\n"
                                        "duration_s = 0.02\n"
                                        "seed = 11\n");
    const ScenarioConfig cfg = load_scenario_config(path);
    REQUIRE(cfg.links.size() == 2);
    CHECK(cfg.links[0].source.mu == doctest::Approx(4e-3));
    CHECK(fidelity_to_psi_plus(cfg.links[0].source.state) == doctest::Approx(0.989));
    CHECK(cfg.links[0].alice.loss_db == doctest::Approx(3.0));
    CHECK(cfg.links[1].source.mu == doctest::Approx(2e-3));
    CHECK(fidelity_to_psi_plus(cfg.links[1].source.state) == doctest::Approx(0.95));
    CHECK(cfg.links[1].alice.loss_db == doctest::Approx(1.5));
    CHECK(cfg.links[1].bob.loss_db == doctest::Approx(2.5));
    CHECK(validate_scenario(cfg).empty());

    const std::string orphan = write_temp("qkdnet_scenario_orphan.cfg",
                                          "[network]\n"
                                          "users = a, b\n"
                                          "links = a:b\n"
                                          "[link x:y]\n"
                                          "mu = 1e-3\n");
    try {
        (void)load_scenario_config(orphan);
        FAIL("orphan link override accepted");
    } catch (const config_error& e) {
        CHECK(contains(e.what(), "does not match any requested link"));
    }
}

TEST_CASE("run_scenario simulates every granted link deterministically") {
    const ScenarioConfig cfg = tiny_scenario();
    RunReport r = run_scenario(cfg);

    CHECK(r.plan.pairs.size() == 27);
    CHECK(r.waitlisted.empty());
    REQUIRE(r.links.size() == 2);
    CHECK(r.links[0].pair_id == 0);
    CHECK(r.links[1].pair_id == 1);
    CHECK(r.links[0].user_a == "alice");
    CHECK(r.links[1].user_a == "carol");

    // The per-link override halves the pair rate at identical losses.
    CHECK(r.links[0].analytic.coincidence_hz ==
          doctest::Approx(2.0 * r.links[1].analytic.coincidence_hz).epsilon(1e-12));

    for (const LinkReport& link : r.links) {
        CHECK(link.raw_a > 0);
        CHECK(link.raw_b > 0);
        CHECK(link.table.total() > 100.0);
        CHECK(link.qber_defined);
        CHECK(link.sifted.bps > 0.0);
        CHECK_FALSE(link.secure.below_threshold);
        CHECK(link.secure.bps > 0.0);
        CHECK(link.series.empty());  // windows = 1
        CHECK(link.histogram.bins == 192);
        CHECK(link.histogram.total > 0);
        CHECK(link.signal_nm < link.idler_nm);  // signal is the higher frequency
    }

    // Noisier link shows the larger error rate.
    CHECK(r.links[1].qber_est.e_h > r.links[0].qber_est.e_h);

    RunReport again = run_scenario(cfg);
    r.timestamp_unix_ms = 0;
    again.timestamp_unix_ms = 0;
    CHECK(report_to_json(r) == report_to_json(again));

    ScenarioConfig reseeded = cfg;
    reseeded.seed = 12;
    RunReport other = run_scenario(reseeded);
    other.timestamp_unix_ms = 0;
    CHECK(report_to_json(r) != report_to_json(other));

    // Sibling links must not share randomness even with identical parameters.
    CHECK(r.links[0].raw_a != r.links[1].raw_a);
}

TEST_CASE("windowed runs partition the acquisition") {
    ScenarioConfig cfg = tiny_scenario();
    cfg.windows = 3;
    const RunReport r = run_scenario(cfg);
    for (const LinkReport& link : r.links) {
        REQUIRE(link.series.size() == 3);
        CHECK(link.series.front().t_start_s == doctest::Approx(0.0));
        CHECK(link.series.back().t_end_s == doctest::Approx(cfg.duration_s).epsilon(1e-9));
        double n_h = 0.0, n_d = 0.0;
        for (std::size_t w = 0; w < link.series.size(); ++w) {
            const StabilityPoint& pt = link.series[w];
            CHECK(pt.window_index == w);
            CHECK(pt.t_end_s > pt.t_start_s);
            if (w > 0)
                CHECK(pt.t_start_s == doctest::Approx(link.series[w - 1].t_end_s));
            REQUIRE_FALSE(pt.empty);
            n_h += pt.q.n_h;
            n_d += pt.q.n_d;
        }
        // Windows partition the pulses, so per-window counts sum to the run totals.
        CHECK(n_h == doctest::Approx(link.qber_est.n_h));
        CHECK(n_d == doctest::Approx(link.qber_est.n_d));
    }
}

TEST_CASE("report json carries the full document") {
    ScenarioConfig cfg = tiny_scenario();
    PublishedValues pv;
    pv.sifted_bps = 32.5;
    pv.e_h_pct = 2.35;
    pv.e_d_pct = 2.15;
    pv.bar3_h_pct = 0.51;
    pv.bar3_d_pct = 0.48;
    cfg.published = pv;

    const RunReport r = run_scenario(cfg);
    REQUIRE(r.published.has_value());
    const RateWithBar sifted = published_sifted(32.5, cfg.duration_s);
    const QberEstimate q =
        published_qber(0.0235, 0.0215, 32.5, cfg.duration_s, 0.0051, 0.0048);
    const SecureRate expect = secure_rate(sifted, q, cfg.f_ec);
    CHECK(r.published->secure.bps == doctest::Approx(expect.bps).epsilon(1e-12));

    const auto j = nlohmann::json::parse(report_to_json(r));
    CHECK(j.at("format") == "qkdnet-run-report");
    CHECK(j.at("version") == 1);
    CHECK(j.at("seed") == 11);
    CHECK(j.at("plan").at("pair_count") == 27);
    CHECK(j.at("plan").at("pairs").size() == 27);
    CHECK(j.at("network").at("users").size() == 4);
    CHECK(j.at("network").at("links").size() == 2);
    CHECK(j.at("network").at("free_pairs") == 25);
    CHECK_FALSE(j.at("caveats").empty());
    CHECK_FALSE(j.at("published_reproduction").is_null());
    REQUIRE(j.at("links").size() == 2);
    const auto& l0 = j.at("links").at(0);
    CHECK(l0.at("pair_id") == 0);
    CHECK(l0.at("counters").at("raw_a").get<double>() > 0.0);
    CHECK(l0.at("coincidences").at("total").get<double>() > 0.0);
    CHECK_FALSE(l0.at("qber").is_null());
    CHECK(l0.contains("secure_bps"));

    ScenarioConfig plain = tiny_scenario();
    const RunReport no_pub = run_scenario(plain);
    CHECK_FALSE(no_pub.published.has_value());
    const auto j2 = nlohmann::json::parse(report_to_json(no_pub));
    CHECK(j2.at("published_reproduction").is_null());
}

TEST_CASE("report files land in the output directory") {
    ScenarioConfig cfg = tiny_scenario();
    cfg.windows = 2;
    const RunReport r = run_scenario(cfg);

    const auto dir = std::filesystem::temp_directory_path() / "qkdnet_report_test";
    std::filesystem::remove_all(dir);
    write_report_files(r, dir.string());

    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "plan.csv"));
    CHECK(std::filesystem::exists(dir / "links.csv"));
    CHECK(std::filesystem::exists(dir / "qber_series_0.csv"));
    CHECK(std::filesystem::exists(dir / "qber_series_1.csv"));
    CHECK(std::filesystem::exists(dir / "histogram_0.csv"));
    CHECK(std::filesystem::exists(dir / "histogram_1.csv"));

    std::ifstream f(dir / "report.json");
    nlohmann::json j;
    f >> j;
    CHECK(j.at("format") == "qkdnet-run-report");

    std::ifstream links_csv(dir / "links.csv");
    std::string header;
    std::getline(links_csv, header);
    CHECK(contains(header, "pair_id"));
    CHECK(contains(header, "sifted_bps"));
    std::string row;
    std::getline(links_csv, row);
    CHECK(row.rfind("0,", 0) == 0);

    std::filesystem::remove_all(dir);
}
