#ifndef FEDIDS_NETMODEL_HPP
#define FEDIDS_NETMODEL_HPP

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedids/error.hpp"

namespace fedids {

enum class Role : std::uint8_t { Coordinator, Router, Edge, Attacker };

/// One node of the fixed testbed roster: C, R1..R3, E1..E4, A.
struct NodeId {
    Role role = Role::Coordinator;
    std::uint8_t index = 0; // 1-based for routers and edges, 0 otherwise

    static constexpr std::size_t kRouters = 3;
    static constexpr std::size_t kEdges = 4;
    static constexpr std::size_t kCount = 2 + kRouters + kEdges;

    static constexpr NodeId coordinator() { return {Role::Coordinator, 0}; }
    static constexpr NodeId attacker() { return {Role::Attacker, 0}; }
    static constexpr NodeId router(std::uint8_t i) { return {Role::Router, i}; }
    static constexpr NodeId edge(std::uint8_t i) { return {Role::Edge, i}; }

    constexpr bool is_coordinator() const { return role == Role::Coordinator; }
    constexpr bool is_attacker() const { return role == Role::Attacker; }
    constexpr bool is_router() const { return role == Role::Router; }
    constexpr bool is_edge() const { return role == Role::Edge; }

    /// Dense position in the roster: C=0, R1..R3=1..3, E1..E4=4..7, A=8.
    constexpr std::size_t dense() const {
        switch (role) {
        case Role::Coordinator: return 0;
        case Role::Router: return index;
        case Role::Edge: return kRouters + index;
        case Role::Attacker: return kCount - 1;
        }
        return 0;
    }

    std::string str() const {
        switch (role) {
        case Role::Coordinator: return "C";
        case Role::Attacker: return "A";
        case Role::Router: return "R" + std::to_string(index);
        case Role::Edge: return "E" + std::to_string(index);
        }
        return "?";
    }

    friend constexpr bool operator==(NodeId, NodeId) = default;
    friend constexpr auto operator<=>(NodeId a, NodeId b) { return a.dense() <=> b.dense(); }
};

/// All nodes in dense order.
inline constexpr std::array<NodeId, NodeId::kCount> kRoster = {
    NodeId::coordinator(), NodeId::router(1), NodeId::router(2), NodeId::router(3),
    NodeId::edge(1),       NodeId::edge(2),   NodeId::edge(3),   NodeId::edge(4),
    NodeId::attacker()};

inline constexpr std::array<NodeId, NodeId::kRouters> kRouters = {
    NodeId::router(1), NodeId::router(2), NodeId::router(3)};

inline constexpr std::array<NodeId, NodeId::kEdges> kEdges = {
    NodeId::edge(1), NodeId::edge(2), NodeId::edge(3), NodeId::edge(4)};

/// Non-throwing token lookup. Returns false for anything outside the roster.
inline bool try_parse_node(std::string_view tok, NodeId& out) {
    if (tok == "C") { out = NodeId::coordinator(); return true; }
    if (tok == "A") { out = NodeId::attacker(); return true; }
    if (tok.size() != 2 || tok[1] < '1' || tok[1] > '9') return false;
    const auto i = static_cast<std::uint8_t>(tok[1] - '0');
    if (tok[0] == 'R' && i <= NodeId::kRouters) { out = NodeId::router(i); return true; }
    if (tok[0] == 'E' && i <= NodeId::kEdges) { out = NodeId::edge(i); return true; }
    return false;
}

inline NodeId parse_node(std::string_view tok) {
    NodeId n;
    if (!try_parse_node(tok, n)) throw UnknownNode("unknown node '" + std::string(tok) + "'");
    return n;
}

/// Attack scenario families. Their baselines differ only in where R3
/// forwards (R2 for I/II, C for III).
enum class ScenarioFamily : std::uint8_t { I, II, III };

inline std::string to_string(ScenarioFamily f) {
    switch (f) {
    case ScenarioFamily::I: return "I";
    case ScenarioFamily::II: return "II";
    case ScenarioFamily::III: return "III";
    }
    return "?";
}

inline ScenarioFamily parse_family(std::string_view s) {
    if (s == "I" || s == "1") return ScenarioFamily::I;
    if (s == "II" || s == "2") return ScenarioFamily::II;
    if (s == "III" || s == "3") return ScenarioFamily::III;
    throw ConfigError("unknown scenario family '" + std::string(s) + "'");
}

using RouteTable = std::map<NodeId, NodeId>;

struct Topology {
    std::vector<NodeId> nodes;
    RouteTable normal_dest;
    RouteTable current_dest;
    std::string pan_id = "0x1A2B";

    bool contains(NodeId n) const {
        for (auto m : nodes)
            if (m == n) return true;
        return false;
    }

    bool attack_active() const { return current_dest != normal_dest; }

    friend bool operator==(const Topology&, const Topology&) = default;
};

inline Topology build_topology(ScenarioFamily family) {
    Topology t;
    t.nodes.assign(kRoster.begin(), kRoster.end());
    const auto C = NodeId::coordinator();
    const auto R1 = NodeId::router(1), R2 = NodeId::router(2), R3 = NodeId::router(3);
    t.normal_dest = {
        {NodeId::edge(1), R1}, {NodeId::edge(2), R1}, {NodeId::edge(3), R3},
        {NodeId::edge(4), R2}, {R1, C},               {R2, C},
        {R3, family == ScenarioFamily::III ? C : R2},
    };
    t.current_dest = t.normal_dest;
    return t;
}

/// Mutates the live routing entry of `target`. The coordinator never forwards,
/// so it cannot be redirected.
inline Topology set_destination(Topology t, NodeId target, NodeId new_dest) {
    if (!t.contains(target)) throw UnknownNode("unknown node " + target.str());
    if (!t.contains(new_dest)) throw UnknownNode("unknown node " + new_dest.str());
    if (target.is_coordinator() || target.is_attacker())
        throw InvalidRedirection(target.str() + " cannot be redirected");
    if (new_dest == target) throw InvalidRedirection(target.str() + " cannot forward to itself");
    if (new_dest.is_edge())
        throw InvalidRedirection("edge " + new_dest.str() + " is not a forwarding destination");
    t.current_dest[target] = new_dest;
    return t;
}

inline Topology restore_normal(Topology t) {
    t.current_dest = t.normal_dest;
    return t;
}

inline constexpr std::size_t kHopLimit = 8;

struct RoutePath {
    std::vector<NodeId> nodes;
    bool loop = false;

    std::size_t hops() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    NodeId terminal() const { return nodes.back(); }
    bool operator==(const RoutePath&) const = default;
};

/// Follows `current_dest` from `src` until the coordinator or the attacker.
/// Paths that revisit a node are followed until the hop limit and flagged.
inline RoutePath route_path(const Topology& t, NodeId src) {
    if (!t.contains(src)) throw UnknownNode("unknown node " + src.str());
    RoutePath p;
    p.nodes.push_back(src);
    std::array<bool, NodeId::kCount> seen{};
    seen[src.dense()] = true;
    NodeId at = src;
    while (!at.is_coordinator() && !at.is_attacker()) {
        if (p.hops() >= kHopLimit) {
            p.loop = true;
            break;
        }
        auto it = t.current_dest.find(at);
        if (it == t.current_dest.end())
            throw UnknownNode(at.str() + " has no destination");
        at = it->second;
        if (seen[at.dense()]) p.loop = true;
        seen[at.dense()] = true;
        p.nodes.push_back(at);
    }
    return p;
}

/// Parent of each router in the normal routing tree (a router or C).
inline NodeId parent_of(const Topology& t, NodeId router) {
    auto it = t.normal_dest.find(router);
    if (it == t.normal_dest.end()) throw UnknownNode(router.str() + " has no destination");
    return it->second;
}

inline std::string route_token(NodeId from, NodeId to) { return from.str() + ">" + to.str(); }

inline std::pair<NodeId, NodeId> parse_route_token(std::string_view tok) {
    auto gt = tok.find('>');
    if (gt == std::string_view::npos) throw ConfigError("route token '" + std::string(tok) + "' lacks '>'");
    return {parse_node(tok.substr(0, gt)), parse_node(tok.substr(gt + 1))};
}

/// Key-value text form:
///   pan_id = 0x1A2B
///   nodes = C R1 ...
///   normal = E1>R1 E2>R1 ...
///   current = ...        (only when an attack is installed)
inline std::string serialize_topology(const Topology& t) {
    std::ostringstream os;
    os << "pan_id = " << t.pan_id << "\nnodes =";
    for (auto n : t.nodes) os << ' ' << n.str();
    os << "\nnormal =";
    for (auto& [from, to] : t.normal_dest) os << ' ' << route_token(from, to);
    os << '\n';
    if (t.attack_active()) {
        os << "current =";
        for (auto& [from, to] : t.current_dest) os << ' ' << route_token(from, to);
        os << '\n';
    }
    return os.str();
}

inline Topology parse_topology(std::string_view text) {
    Topology t;
    bool have_current = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw ConfigError("topology line without '=': " + line);
            continue;
        }
        std::istringstream key_in(line.substr(0, eq));
        std::string key;
        key_in >> key;
        std::istringstream vals(line.substr(eq + 1));
        std::string tok;
        if (key == "pan_id") {
            vals >> t.pan_id;
        } else if (key == "nodes") {
            while (vals >> tok) t.nodes.push_back(parse_node(tok));
        } else if (key == "normal" || key == "current") {
            auto& table = key == "normal" ? t.normal_dest : t.current_dest;
            while (vals >> tok) {
                auto [from, to] = parse_route_token(tok);
                table[from] = to;
            }
            have_current = have_current || key == "current";
        } else {
            throw ConfigError("unknown topology key '" + key + "'");
        }
    }
    if (!have_current) t.current_dest = t.normal_dest;
    std::size_t coordinators = 0, attackers = 0;
    for (auto n : t.nodes) {
        coordinators += n.is_coordinator();
        attackers += n.is_attacker();
    }
    if (coordinators != 1 || attackers != 1)
        throw ConfigError("topology needs exactly one coordinator and one attacker");
    return t;
}

} // namespace fedids

#endif // FEDIDS_NETMODEL_HPP
