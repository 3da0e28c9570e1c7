#ifndef FEDIDS_ATTACKS_HPP
#define FEDIDS_ATTACKS_HPP

#include <chrono>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedids/error.hpp"
#include "fedids/netmodel.hpp"
#include "fedids/timestamp.hpp"

namespace fedids {

/// One redirection: `target` starts forwarding to `new_dest`.
struct AttackSpec {
    ScenarioFamily scenario = ScenarioFamily::I;
    NodeId target;
    NodeId new_dest;

    std::string token() const { return route_token(target, new_dest); }
    /// Filesystem-friendly name, e.g. "III_E1-A".
    std::string slug() const { return to_string(scenario) + "_" + target.str() + "-" + new_dest.str(); }
    bool operator==(const AttackSpec&) const = default;
};

inline void validate_spec(const AttackSpec& s) {
    const auto base = build_topology(s.scenario);
    const auto normal = base.normal_dest.at(s.target);
    auto fail = [&](const char* why) {
        throw InvalidRedirection("scenario " + to_string(s.scenario) + " attack " + s.token() + ": " + why);
    };
    if (s.new_dest == normal) fail("destination equals the normal route");
    if (s.new_dest == s.target) fail("target cannot forward to itself");
    switch (s.scenario) {
    case ScenarioFamily::I:
        if (!s.target.is_edge()) fail("scenario I targets edge devices");
        if (!s.new_dest.is_router() && !s.new_dest.is_coordinator()) fail("scenario I redirects to a router or C");
        break;
    case ScenarioFamily::II:
        if (!s.target.is_router()) fail("scenario II targets routers");
        if (!s.new_dest.is_router() && !s.new_dest.is_coordinator()) fail("scenario II redirects to a router or C");
        break;
    case ScenarioFamily::III:
        if (!s.target.is_edge() && !s.target.is_router()) fail("scenario III targets edges or routers");
        if (!s.new_dest.is_attacker()) fail("scenario III redirects to the attacker");
        break;
    }
}

/// The redirection catalogue, in table order.
inline std::vector<AttackSpec> enumerate_attacks(ScenarioFamily scenario) {
    const auto C = NodeId::coordinator();
    const auto R1 = NodeId::router(1), R2 = NodeId::router(2), R3 = NodeId::router(3);
    std::vector<AttackSpec> out;
    switch (scenario) {
    case ScenarioFamily::I: {
        const auto base = build_topology(scenario);
        for (auto e : kEdges)
            for (auto d : {R1, R2, R3, C})
                if (d != base.normal_dest.at(e)) out.push_back({scenario, e, d});
        break;
    }
    case ScenarioFamily::II:
        // Verbatim from the table; R2>R3 is not part of the catalogue.
        out = {{scenario, R1, R2}, {scenario, R1, R3}, {scenario, R2, R1}, {scenario, R3, R1}, {scenario, R3, C}};
        break;
    case ScenarioFamily::III:
        for (auto e : kEdges) out.push_back({scenario, e, NodeId::attacker()});
        for (auto r : kRouters) out.push_back({scenario, r, NodeId::attacker()});
        break;
    }
    return out;
}

inline AttackSpec parse_attack(ScenarioFamily scenario, std::string_view token) {
    auto [target, dest] = parse_route_token(token);
    AttackSpec s{scenario, target, dest};
    validate_spec(s);
    return s;
}

/// Normal traffic, one attack window, normal traffic again.
struct AttackPlan {
    AttackSpec spec;
    Micros normal_before = std::chrono::minutes{20};
    Micros attack_window = std::chrono::minutes{5};
    Micros normal_after = std::chrono::minutes{10};

    Micros attack_begin() const { return normal_before; }
    Micros attack_end() const { return normal_before + attack_window; }
    Micros total() const { return normal_before + attack_window + normal_after; }
    bool active_at(Micros now) const { return now >= attack_begin() && now < attack_end(); }
    bool operator==(const AttackPlan&) const = default;
};

/// Routing in force at offset `now` from the start of the run.
inline Topology apply_plan(const Topology& topology, const AttackPlan& plan, Micros now) {
    Topology t = restore_normal(topology);
    if (plan.active_at(now)) t = set_destination(std::move(t), plan.spec.target, plan.spec.new_dest);
    return t;
}

enum class Truth { Normal, Attack };

inline std::string to_string(Truth t) { return t == Truth::Attack ? "Attack" : "Normal"; }

struct WindowLabel {
    std::size_t window_index;
    Truth truth;
    bool operator==(const WindowLabel&) const = default;
};

/// Tumbling windows over the whole run; any overlap with the attack interval
/// makes a window an Attack window.
inline std::vector<WindowLabel> label_windows(const AttackPlan& plan, Micros window_len) {
    using namespace std::chrono;
    if (window_len <= Micros::zero() || Micros{minutes{1}} % window_len != Micros::zero())
        throw ConfigError("window length must divide one minute evenly");
    const auto total = plan.total();
    const auto n = static_cast<std::size_t>((total + window_len - Micros{1}) / window_len);
    std::vector<WindowLabel> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto lo = window_len * static_cast<long long>(i);
        const auto hi = lo + window_len;
        const bool overlap = plan.attack_window > Micros::zero() && lo < plan.attack_end() && plan.attack_begin() < hi;
        out.push_back({i, overlap ? Truth::Attack : Truth::Normal});
    }
    return out;
}

inline std::string serialize_plan(const AttackPlan& p) {
    std::ostringstream os;
    os << "scenario = " << to_string(p.spec.scenario) << '\n'
       << "attack = " << p.spec.token() << '\n'
       << "normal_before_s = " << std::chrono::duration_cast<std::chrono::seconds>(p.normal_before).count() << '\n'
       << "attack_window_s = " << std::chrono::duration_cast<std::chrono::seconds>(p.attack_window).count() << '\n'
       << "normal_after_s = " << std::chrono::duration_cast<std::chrono::seconds>(p.normal_after).count() << '\n';
    return os.str();
}

inline AttackPlan parse_plan(std::string_view text) {
    AttackPlan p;
    std::string scenario = "I", token;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::istringstream k(line.substr(0, eq)), v(line.substr(eq + 1));
        std::string key, val;
        k >> key;
        v >> val;
        auto secs = [&] { return Micros{std::chrono::seconds{std::stoll(val)}}; };
        if (key == "scenario") scenario = val;
        else if (key == "attack") token = val;
        else if (key == "normal_before_s") p.normal_before = secs();
        else if (key == "attack_window_s") p.attack_window = secs();
        else if (key == "normal_after_s") p.normal_after = secs();
        else throw ConfigError("unknown plan key '" + key + "'");
    }
    if (token.empty()) throw ConfigError("plan needs an 'attack' token");
    p.spec = parse_attack(parse_family(scenario), token);
    return p;
}

} // namespace fedids

#endif // FEDIDS_ATTACKS_HPP
