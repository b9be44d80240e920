#include "qkdnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qkdnet/grid.hpp"
#include "qkdnet/quantum.hpp"

namespace qkdnet {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

// Typed access to one INI section with unknown-key rejection.
class Section {
public:
    Section(const Ini& ini, std::string name) : name_(std::move(name)) {
        const auto it = ini.sections.find(name_);
        if (it != ini.sections.end()) kv_ = &it->second;
    }

    bool present() const { return kv_ != nullptr; }

    std::optional<std::string> raw(const std::string& key) const {
        used_.insert(key);
        if (!kv_) return std::nullopt;
        const auto it = kv_->find(key);
        if (it == kv_->end()) return std::nullopt;
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        return raw(key).value_or(fallback);
    }

    double get_double(const std::string& key, double fallback) const {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const double x = std::stod(*v, &pos);
            if (trim(v->substr(pos)).empty()) return x;
        } catch (const std::exception&) {
        }
        throw config_error("[" + name_ + "] " + key + ": expected a number, got '" + *v + "'");
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const unsigned long long x = std::stoull(*v, &pos);
            if (trim(v->substr(pos)).empty()) return x;
        } catch (const std::exception&) {
        }
        throw config_error("[" + name_ + "] " + key + ": expected an unsigned integer, got '" +
                           *v + "'");
    }

    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const long long x = std::stoll(*v, &pos);
            if (trim(v->substr(pos)).empty()) return x;
        } catch (const std::exception&) {
        }
        throw config_error("[" + name_ + "] " + key + ": expected an integer, got '" + *v + "'");
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto v = raw(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "yes" || *v == "1") return true;
        if (*v == "false" || *v == "no" || *v == "0") return false;
        throw config_error("[" + name_ + "] " + key + ": expected a boolean, got '" + *v + "'");
    }

    void reject_unknown() const {
        if (!kv_) return;
        for (const auto& [key, value] : *kv_)
            if (!used_.count(key))
                throw config_error("[" + name_ + "] unknown key '" + key + "'");
    }

    const std::string& name() const { return name_; }

private:
    std::string name_;
    const std::map<std::string, std::string>* kv_ = nullptr;
    mutable std::set<std::string> used_;
};

TwoQubitState make_state(const Section& sec) {
    const std::string kind = sec.get_string("state", "psi_plus");
    const auto visibility = sec.raw("visibility");
    const auto p = sec.raw("p");
    const auto file = sec.raw("file");
    if (kind == "psi_plus") {
        if (visibility || p || file)
            throw config_error("[" + sec.name() + "] state=psi_plus takes no extra parameters");
        return make_psi_plus();
    }
    if (kind == "colored_noise") {
        if (!visibility)
            throw config_error("[" + sec.name() + "] state=colored_noise requires visibility");
        if (p || file)
            throw config_error("[" + sec.name() + "] state=colored_noise only takes visibility");
        return make_colored_noise_state(sec.get_double("visibility", 1.0));
    }
    if (kind == "werner") {
        if (!p) throw config_error("[" + sec.name() + "] state=werner requires p");
        if (visibility || file)
            throw config_error("[" + sec.name() + "] state=werner only takes p");
        return make_werner_state(sec.get_double("p", 1.0));
    }
    if (kind == "file") {
        if (!file) throw config_error("[" + sec.name() + "] state=file requires file");
        if (visibility || p)
            throw config_error("[" + sec.name() + "] state=file only takes file");
        return load_state_file(*file);
    }
    throw config_error("[" + sec.name() + "] state: expected psi_plus, colored_noise, werner or "
                       "file, got '" + kind + "'");
}

SourceParams parse_source(const Ini& ini, const std::string& name) {
    Section sec(ini, name);
    SourceParams src;
    src.rep_rate_hz = sec.get_double("rep_rate_hz", src.rep_rate_hz);
    src.mu = sec.get_double("mu", src.mu);
    src.state = make_state(sec);
    sec.reject_unknown();
    return src;
}

ArmParams parse_arm(const Ini& ini, const std::string& name) {
    Section sec(ini, name);
    ArmParams arm;
    arm.loss_db = sec.get_double("loss_db", arm.loss_db);
    arm.dark_rate_hz = sec.get_double("dark_rate_hz", arm.dark_rate_hz);
    arm.dead_time_s = sec.get_double("dead_time_ns", 0.0) * 1e-9;
    arm.jitter_sigma_s = sec.get_double("jitter_ps", 100.0) * 1e-12;
    arm.misalign_rad = sec.get_double("misalign_deg", 0.0) * kPi / 180.0;
    sec.reject_unknown();
    return arm;
}

AnalyzerMap parse_analyzer(const Ini& ini) {
    Section sec(ini, "analyzer");
    AnalyzerMap map;
    if (const auto slots = sec.raw("slots_ns")) {
        const auto parts = split(*slots, ',');
        if (parts.size() != 4)
            throw config_error("[analyzer] slots_ns: expected 4 comma-separated offsets");
        for (std::size_t i = 0; i < 4; ++i) {
            try {
                std::size_t pos = 0;
                map.slot_offset_ps[i] = std::stod(parts[i], &pos) * 1000.0;
                if (!trim(parts[i].substr(pos)).empty()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw config_error("[analyzer] slots_ns: '" + parts[i] + "' is not a number");
            }
        }
    }
    map.slot_width_ps = sec.get_double("slot_width_ns", 1.0) * 1000.0;
    sec.reject_unknown();
    return map;
}

}  // namespace

Ini Ini::parse(std::istream& in, const std::string& origin) {
    Ini ini;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw config_error(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw config_error(where + ": empty section name");
            if (ini.sections.count(section))
                throw config_error(where + ": duplicate section [" + section + "]");
            ini.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error(where + ": expected key = value");
        if (section.empty()) throw config_error(where + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error(where + ": empty key");
        if (!ini.sections[section].emplace(key, value).second)
            throw config_error(where + ": duplicate key '" + key + "' in [" + section + "]");
    }
    return ini;
}

Ini Ini::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file '" + path + "'");
    return parse(f, path);
}

SimConfig load_sim_config(const std::string& path) {
    const Ini ini = Ini::parse_file(path);
    for (const auto& [name, kv] : ini.sections)
        if (name != "source" && name != "alice" && name != "bob" && name != "analyzer" &&
            name != "run")
            throw config_error("unknown section [" + name + "] in '" + path + "'");
    SimConfig cfg;
    cfg.source = parse_source(ini, "source");
    cfg.alice = parse_arm(ini, "alice");
    cfg.bob = parse_arm(ini, "bob");
    cfg.analyzer = parse_analyzer(ini);
    Section run(ini, "run");
    cfg.duration_s = run.get_double("duration_s", cfg.duration_s);
    cfg.seed = run.get_u64("seed", cfg.seed);
    run.reject_unknown();
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    const Ini ini = Ini::parse_file(path);
    ScenarioConfig cfg;

    Section grid(ini, "grid");
    cfg.pump_nm = grid.get_double("pump_nm", cfg.pump_nm);
    if (const auto band = grid.raw("band_nm")) {
        const auto parts = split(*band, ':');
        bool ok = parts.size() == 2;
        if (ok) {
            try {
                cfg.band_lo_nm = std::stod(parts[0]);
                cfg.band_hi_nm = std::stod(parts[1]);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) throw config_error("[grid] band_nm: expected <lo>:<hi> in nm");
    }
    cfg.spacing_ghz = grid.get_i64("spacing_ghz", cfg.spacing_ghz);
    cfg.strict_itu = grid.get_bool("strict_itu", cfg.strict_itu);
    cfg.eps_conj_ghz = grid.get_double("eps_conj_ghz", cfg.eps_conj_ghz);
    grid.reject_unknown();

    Section network(ini, "network");
    if (const auto users = network.raw("users")) {
        for (const auto& u : split(*users, ','))
            if (!u.empty()) cfg.users.push_back(u);
    }
    std::vector<std::pair<std::string, std::string>> link_names;
    if (const auto links = network.raw("links")) {
        for (const auto& item : split(*links, ',')) {
            if (item.empty()) continue;
            const auto ab = split(item, ':');
            if (ab.size() != 2 || ab[0].empty() || ab[1].empty())
                throw config_error("[network] links: expected <a>:<b>, got '" + item + "'");
            link_names.emplace_back(ab[0], ab[1]);
        }
    }
    network.reject_unknown();

    const SourceParams default_source = parse_source(ini, "source");
    const ArmParams default_alice = parse_arm(ini, "alice");
    const ArmParams default_bob = parse_arm(ini, "bob");
    cfg.analyzer = parse_analyzer(ini);

    std::set<std::string> override_sections;
    for (const auto& [name, kv] : ini.sections)
        if (name.rfind("link ", 0) == 0) override_sections.insert(name);

    for (const auto& [a, b] : link_names) {
        LinkSpec link;
        link.user_a = a;
        link.user_b = b;
        link.source = default_source;
        link.alice = default_alice;
        link.bob = default_bob;
        const std::string sec_name = "link " + a + ":" + b;
        Section sec(ini, sec_name);
        if (sec.present()) {
            override_sections.erase(sec_name);
            link.source.mu = sec.get_double("mu", link.source.mu);
            if (const auto vis = sec.raw("visibility"))
                link.source.state = make_colored_noise_state(sec.get_double("visibility", 1.0));
            link.alice.loss_db = sec.get_double("loss_a_db", link.alice.loss_db);
            link.bob.loss_db = sec.get_double("loss_b_db", link.bob.loss_db);
            sec.reject_unknown();
        }
        cfg.links.push_back(link);
    }
    if (!override_sections.empty())
        throw config_error("[" + *override_sections.begin() +
                           "] does not match any requested link");

    Section run(ini, "run");
    cfg.duration_s = run.get_double("duration_s", cfg.duration_s);
    cfg.seed = run.get_u64("seed", cfg.seed);
    cfg.windows = static_cast<std::uint32_t>(run.get_u64("windows", cfg.windows));
    cfg.f_ec = run.get_double("f_ec", cfg.f_ec);
    run.reject_unknown();

    Section published(ini, "published");
    if (published.present()) {
        PublishedValues pv;
        pv.sifted_bps = published.get_double("sifted_bps", 0.0);
        pv.e_h_pct = published.get_double("e_h_pct", 0.0);
        pv.e_d_pct = published.get_double("e_d_pct", 0.0);
        pv.bar3_h_pct = published.get_double("e_h_bar3_pct", 0.0);
        pv.bar3_d_pct = published.get_double("e_d_bar3_pct", 0.0);
        published.reject_unknown();
        cfg.published = pv;
    }

    Section output(ini, "output");
    cfg.out_dir = output.get_string("dir", "");
    cfg.emit_histogram = output.get_bool("histogram", cfg.emit_histogram);
    output.reject_unknown();

    for (const auto& [name, kv] : ini.sections) {
        static const std::set<std::string> known{"grid",     "network", "source", "alice",
                                                 "bob",      "analyzer", "run",   "published",
                                                 "output"};
        if (!known.count(name) && name.rfind("link ", 0) != 0)
            throw config_error("unknown section [" + name + "] in '" + path + "'");
    }
    return cfg;
}

std::vector<std::string> validate_scenario(const ScenarioConfig& cfg) {
    std::vector<std::string> diag;
    const auto add = [&](const std::string& msg) { diag.push_back(msg); };

    if (!(cfg.pump_nm > 0.0)) add("[grid] pump_nm: must be positive");
    if (!(cfg.band_lo_nm > 0.0) || !(cfg.band_hi_nm > cfg.band_lo_nm))
        add("[grid] band_nm: need 0 < lo < hi");
    if (cfg.spacing_ghz != 50 && cfg.spacing_ghz != 100 && cfg.spacing_ghz != 200)
        add("[grid] spacing_ghz: must be 50, 100 or 200, got " + std::to_string(cfg.spacing_ghz));

    std::set<std::string> seen;
    for (const auto& u : cfg.users)
        if (!seen.insert(u).second) add("[network] users: duplicate user '" + u + "'");

    std::map<std::string, int> uses;
    for (std::size_t i = 0; i < cfg.links.size(); ++i) {
        const LinkSpec& l = cfg.links[i];
        const std::string where = "[network] links[" + std::to_string(i) + "]: ";
        if (l.user_a == l.user_b) add(where + "user '" + l.user_a + "' linked with itself");
        for (const auto& u : {l.user_a, l.user_b}) {
            if (!seen.count(u)) add(where + "unknown user '" + u + "'");
            if (++uses[u] > 1) add(where + "user '" + u + "' appears in multiple requests");
        }
        if (!(l.source.rep_rate_hz > 0.0)) add(where + "rep_rate_hz must be positive");
        if (!(l.source.mu >= 0.0)) add(where + "mu must be non-negative");
        for (const auto* arm : {&l.alice, &l.bob}) {
            if (!(arm->loss_db >= 0.0)) add(where + "loss_db must be non-negative");
            if (!(arm->dark_rate_hz >= 0.0)) add(where + "dark_rate_hz must be non-negative");
            if (!(arm->dead_time_s >= 0.0)) add(where + "dead_time_ns must be non-negative");
            if (!(arm->jitter_sigma_s >= 0.0)) add(where + "jitter_ps must be non-negative");
        }
        if (l.source.rep_rate_hz > 0.0) {
            try {
                cfg.analyzer.validate(1e12 / l.source.rep_rate_hz);
            } catch (const config_error& e) {
                add("[analyzer] " + std::string(e.what()));
            }
        }
    }

    if (!(cfg.duration_s > 0.0)) add("[run] duration_s: must be positive");
    if (cfg.windows < 1) add("[run] windows: must be at least 1");
    if (!(cfg.f_ec >= 1.0)) add("[run] f_ec: must be >= 1");

    if (cfg.published) {
        if (!(cfg.published->sifted_bps >= 0.0)) add("[published] sifted_bps: must be >= 0");
        for (const auto& [key, val] :
             {std::pair<const char*, double>{"e_h_pct", cfg.published->e_h_pct},
              {"e_d_pct", cfg.published->e_d_pct}})
            if (!(val >= 0.0 && val <= 100.0))
                add(std::string("[published] ") + key + ": must lie in [0, 100]");
    }

    // Capacity: links beyond the plan size would sit on the waitlist forever.
    if (!cfg.links.empty() && cfg.spacing_ghz > 0) {
        try {
            const ChannelPlan plan = plan_channels(
                wavelength_to_frequency(cfg.pump_nm), wavelength_to_frequency(cfg.band_hi_nm),
                wavelength_to_frequency(cfg.band_lo_nm), cfg.spacing_ghz, cfg.eps_conj_ghz,
                cfg.strict_itu);
            if (cfg.links.size() > plan.pairs.size())
                add("[network] links: " + std::to_string(cfg.links.size()) +
                    " links requested but the plan has only " +
                    std::to_string(plan.pairs.size()) + " channel pairs");
        } catch (const std::exception&) {
            // Plan construction problems are already reported by the grid checks.
        }
    }
    return diag;
}

}  // namespace qkdnet
