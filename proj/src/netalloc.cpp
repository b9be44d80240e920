#include "qkdnet/netalloc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qkdnet {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_registered(const SwitchState& s, const std::string& name) {
    if (!s.user_known(name)) throw request_error("unknown user '" + name + "'");
}

bool same_pair(const WaitEntry& e, const std::string& a, const std::string& b) {
    return (e.user_a == a && e.user_b == b) || (e.user_a == b && e.user_b == a);
}

std::uint64_t grant_lowest(SwitchState& s, const std::string& a, const std::string& b) {
    const auto free = s.free_pairs();
    const std::uint64_t id = *free.begin();
    Link link{id, a, b, s.op_seq};
    const auto pos = std::lower_bound(
        s.links.begin(), s.links.end(), id,
        [](const Link& l, std::uint64_t v) { return l.pair_id < v; });
    s.links.insert(pos, link);
    return id;
}

}  // namespace

std::set<std::uint64_t> SwitchState::free_pairs() const {
    std::set<std::uint64_t> free;
    for (std::uint64_t id = 0; id < plan.pairs.size(); ++id) free.insert(id);
    for (const Link& l : links) free.erase(l.pair_id);
    return free;
}

bool SwitchState::user_busy(const std::string& name) const {
    for (const Link& l : links)
        if (l.user_a == name || l.user_b == name) return true;
    return false;
}

bool SwitchState::user_known(const std::string& name) const {
    return std::find(users.begin(), users.end(), name) != users.end();
}

bool operator==(const SwitchState& a, const SwitchState& b) {
    const auto plan_key = [](const ChannelPlan& p) {
        std::vector<std::int64_t> k{p.pump.ghz, p.band_low.ghz, p.band_high.ghz,
                                    p.spacing_ghz, p.strict_itu ? 1 : 0};
        for (const ConjugatePair& c : p.pairs) {
            k.push_back(c.signal.center.ghz);
            k.push_back(c.idler.center.ghz);
        }
        return k;
    };
    return plan_key(a.plan) == plan_key(b.plan) && a.users == b.users && a.links == b.links &&
           a.waitlist == b.waitlist && a.op_seq == b.op_seq;
}

SwitchState make_switch_state(ChannelPlan plan) {
    SwitchState s;
    s.plan = std::move(plan);
    return s;
}

void register_user(SwitchState& s, const std::string& name) {
    if (name.empty()) throw request_error("user name must not be empty");
    if (s.user_known(name)) throw request_error("user '" + name + "' already registered");
    ++s.op_seq;
    s.users.push_back(name);
}

ConnectResult connect(SwitchState& s, const std::string& a, const std::string& b) {
    if (a == b) throw request_error("cannot link user '" + a + "' with itself");
    check_registered(s, a);
    check_registered(s, b);
    if (s.user_busy(a)) throw busy_error("user '" + a + "' already holds a link");
    if (s.user_busy(b)) throw busy_error("user '" + b + "' already holds a link");
    ++s.op_seq;
    if (!s.free_pairs().empty()) {
        // A direct grant supersedes an identical pending request.
        std::erase_if(s.waitlist, [&](const WaitEntry& e) { return same_pair(e, a, b); });
        return ConnectResult{true, grant_lowest(s, a, b)};
    }
    for (const WaitEntry& e : s.waitlist)
        if (same_pair(e, a, b)) return ConnectResult{false, 0};
    s.waitlist.push_back(WaitEntry{a, b, s.op_seq});
    return ConnectResult{false, 0};
}

std::vector<Link> disconnect(SwitchState& s, std::uint64_t pair_id) {
    const auto it = std::find_if(s.links.begin(), s.links.end(),
                                 [&](const Link& l) { return l.pair_id == pair_id; });
    if (it == s.links.end())
        throw state_error("pair " + std::to_string(pair_id) + " is not active");
    ++s.op_seq;
    s.links.erase(it);

    std::vector<Link> granted;
    auto w = s.waitlist.begin();
    while (w != s.waitlist.end() && !s.free_pairs().empty()) {
        if (s.user_busy(w->user_a) || s.user_busy(w->user_b)) {
            ++w;
            continue;
        }
        const std::uint64_t id = grant_lowest(s, w->user_a, w->user_b);
        granted.push_back(Link{id, w->user_a, w->user_b, s.op_seq});
        w = s.waitlist.erase(w);
    }
    return granted;
}

SwitchStatus status(const SwitchState& s) {
    SwitchStatus st;
    st.user_count = s.users.size();
    st.links = s.links;
    const auto free = s.free_pairs();
    st.free_pairs.assign(free.begin(), free.end());
    st.waitlist = s.waitlist;
    return st;
}

namespace {

ordered_json plan_to_json(const ChannelPlan& p) {
    ordered_json pairs = ordered_json::array();
    for (std::size_t i = 0; i < p.pairs.size(); ++i) {
        const ConjugatePair& c = p.pairs[i];
        pairs.push_back({{"pair_id", i},
                         {"signal_ghz", c.signal.center.ghz},
                         {"signal_index", c.signal.index},
                         {"idler_ghz", c.idler.center.ghz},
                         {"idler_index", c.idler.index},
                         {"detuning_ghz", c.detuning_ghz}});
    }
    return ordered_json{{"pump_ghz", p.pump.ghz},
                        {"band_low_ghz", p.band_low.ghz},
                        {"band_high_ghz", p.band_high.ghz},
                        {"spacing_ghz", p.spacing_ghz},
                        {"strict_itu", p.strict_itu},
                        {"pairs", pairs}};
}

ChannelPlan plan_from_json(const ordered_json& j) {
    ChannelPlan p;
    p.pump = Frequency{j.at("pump_ghz").get<std::int64_t>()};
    p.band_low = Frequency{j.at("band_low_ghz").get<std::int64_t>()};
    p.band_high = Frequency{j.at("band_high_ghz").get<std::int64_t>()};
    p.spacing_ghz = j.at("spacing_ghz").get<std::int64_t>();
    p.strict_itu = j.at("strict_itu").get<bool>();
    for (const auto& c : j.at("pairs")) {
        ConjugatePair pair;
        pair.signal = GridChannel{c.at("signal_index").get<std::int64_t>(),
                                  Frequency{c.at("signal_ghz").get<std::int64_t>()},
                                  p.spacing_ghz};
        pair.idler = GridChannel{c.at("idler_index").get<std::int64_t>(),
                                 Frequency{c.at("idler_ghz").get<std::int64_t>()},
                                 p.spacing_ghz};
        pair.detuning_ghz = c.at("detuning_ghz").get<double>();
        p.pairs.push_back(pair);
    }
    return p;
}

}  // namespace

std::string switch_state_to_json(const SwitchState& s) {
    ordered_json links = ordered_json::array();
    for (const Link& l : s.links)
        links.push_back({{"pair_id", l.pair_id},
                         {"user_a", l.user_a},
                         {"user_b", l.user_b},
                         {"established_at", l.established_at}});
    ordered_json waitlist = ordered_json::array();
    for (const WaitEntry& e : s.waitlist)
        waitlist.push_back(
            {{"user_a", e.user_a}, {"user_b", e.user_b}, {"requested_at", e.requested_at}});
    const ordered_json j{{"format", "qkdnet-switch-state"},
                         {"version", 1},
                         {"plan", plan_to_json(s.plan)},
                         {"users", s.users},
                         {"links", links},
                         {"waitlist", waitlist},
                         {"op_seq", s.op_seq}};
    return j.dump(2) + "\n";
}

SwitchState switch_state_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error(std::string("switch state is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw format_error("unsupported switch state version");
        SwitchState s;
        s.plan = plan_from_json(j.at("plan"));
        s.users = j.at("users").get<std::vector<std::string>>();
        for (const auto& l : j.at("links"))
            s.links.push_back(Link{l.at("pair_id").get<std::uint64_t>(),
                                   l.at("user_a").get<std::string>(),
                                   l.at("user_b").get<std::string>(),
                                   l.at("established_at").get<std::uint64_t>()});
        for (const auto& e : j.at("waitlist"))
            s.waitlist.push_back(WaitEntry{e.at("user_a").get<std::string>(),
                                           e.at("user_b").get<std::string>(),
                                           e.at("requested_at").get<std::uint64_t>()});
        s.op_seq = j.at("op_seq").get<std::uint64_t>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed switch state: ") + e.what());
    }
}

void save_switch_state(const std::string& path, const SwitchState& s) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw config_error("cannot open '" + path + "' for writing");
    f << switch_state_to_json(s);
    if (!f) throw config_error("write to '" + path + "' failed");
}

SwitchState load_switch_state(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open switch state file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return switch_state_from_json(buf.str());
}

}  // namespace qkdnet
