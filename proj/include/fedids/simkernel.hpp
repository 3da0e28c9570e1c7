#ifndef FEDIDS_SIMKERNEL_HPP
#define FEDIDS_SIMKERNEL_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "fedids/attacks.hpp"
#include "fedids/error.hpp"
#include "fedids/logfmt.hpp"
#include "fedids/netmodel.hpp"
#include "fedids/timestamp.hpp"

namespace fedids {

/// Lognormal delay parameterised by its median.
struct DelayModel {
    double median_ms = 120.0;
    double sigma = 0.5;
};

using Rng = std::mt19937_64;

/// Draws median * exp(sigma * N(0,1)), rounded to whole microseconds and never
/// below 1 us. sigma == 0 returns the median on every draw.
inline Micros sample_hop_delay(Rng& rng, const DelayModel& m) {
    double ms = m.median_ms;
    if (m.sigma > 0) {
        std::normal_distribution<double> z(0.0, 1.0);
        ms = m.median_ms * std::exp(m.sigma * z(rng));
    }
    auto us = static_cast<long long>(std::llround(ms * 1000.0));
    return Micros{std::max(1LL, us)};
}

struct SimConfig {
    std::uint64_t seed = 1;
    Micros send_period = std::chrono::seconds{1};
    DelayModel hop_delay{120.0, 0.5};
    /// Time a router holds a packet between reception and retransmission.
    DelayModel forward_delay{30.0, 0.3};
    Micros duration = std::chrono::minutes{35};
    Timestamp start_time = Timestamp{std::chrono::sys_days{std::chrono::year{2024} / 4 / 26}} +
                           std::chrono::hours{13};
    /// Constant offset added to every timestamp a node records.
    std::map<NodeId, Micros> clock_skew;
    double drop_probability = 0.0;

    void validate() const {
        if (send_period <= Micros::zero()) throw ConfigError("send_period must be positive");
        if (duration <= Micros::zero()) throw ConfigError("duration must be positive");
        for (const auto* m : {&hop_delay, &forward_delay}) {
            if (!(m->median_ms > 0)) throw ConfigError("delay median must be positive");
            if (!(m->sigma >= 0)) throw ConfigError("delay sigma must be non-negative");
        }
        if (!(drop_probability >= 0 && drop_probability <= 1)) throw ConfigError("drop_probability outside [0,1]");
    }
};

struct Hop {
    NodeId from;
    NodeId to;
    Timestamp sent_at;
    std::optional<Timestamp> received_at;
    bool operator==(const Hop&) const = default;
};

struct PacketTrace {
    std::uint64_t id = 0;
    NodeId origin;
    std::vector<Hop> hops;
    std::optional<NodeId> delivered_to; // nullopt: dropped
    std::vector<int> status_per_hop;
    bool loop = false;

    bool dropped() const { return !delivered_to.has_value(); }
    bool operator==(const PacketTrace&) const = default;
};

/// Log text per device (C, routers, edges). The attacker keeps no log.
using LogDocuments = std::map<NodeId, std::string>;

struct SimResult {
    std::vector<PacketTrace> traces;
    LogDocuments logs;
};

namespace detail {

enum class EventKind : std::uint8_t { Send, Arrive, Forward };

struct Event {
    Micros at;
    std::uint64_t seq;
    EventKind kind;
    std::size_t subject; // edge index for Send, packet index otherwise

    bool operator>(const Event& o) const { return std::tie(at, seq) > std::tie(o.at, o.seq); }
};

struct InFlight {
    std::vector<NodeId> path;
    std::size_t next_hop = 0; // index of the hop being transmitted
};

} // namespace detail

/// Renders one trace into the per-device log entries it produces.
/// Returns (device, record time, entry) triples.
inline std::vector<std::tuple<NodeId, Timestamp, LogEntry>> render_trace(const PacketTrace& tr) {
    std::vector<std::tuple<NodeId, Timestamp, LogEntry>> out;
    auto segments_upto = [&](std::size_t last) {
        std::vector<Segment> segs;
        for (std::size_t i = 0; i <= last; ++i) {
            const auto& h = tr.hops[i];
            segs.push_back({h.from, h.to, h.sent_at, i < last ? h.received_at : std::nullopt});
        }
        return segs;
    };
    for (std::size_t i = 0; i < tr.hops.size(); ++i) {
        const auto& h = tr.hops[i];
        LogEntry e;
        e.segments = segments_upto(i);
        e.status = tr.status_per_hop[i];
        if (i == 0) {
            e.kind = EntryKind::Edge;
            out.emplace_back(h.from, h.sent_at, std::move(e));
        } else if (h.from.is_router()) {
            e.kind = EntryKind::Router;
            out.emplace_back(h.from, h.sent_at, std::move(e));
        }
    }
    if (tr.delivered_to && tr.delivered_to->is_coordinator()) {
        LogEntry e;
        e.kind = EntryKind::Coordinator;
        for (const auto& h : tr.hops) e.segments.push_back({h.from, h.to, h.sent_at, h.received_at});
        out.emplace_back(NodeId::coordinator(), *tr.hops.back().received_at, std::move(e));
    }
    return out;
}

/// Builds the per-device log files from a trace set. Lines within a file are
/// ordered by the time the device recorded them, ties by packet id.
inline LogDocuments render_logs(const std::vector<PacketTrace>& traces) {
    std::map<NodeId, std::vector<std::tuple<Timestamp, std::uint64_t, std::string>>> lines;
    for (auto n : kRoster)
        if (!n.is_attacker()) lines[n];
    for (const auto& tr : traces)
        for (auto& [dev, at, entry] : render_trace(tr)) lines[dev].emplace_back(at, tr.id, serialize_entry(entry));
    LogDocuments docs;
    for (auto& [dev, v] : lines) {
        std::sort(v.begin(), v.end());
        std::string text;
        for (auto& [at, id, s] : v) {
            text += s;
            text += '\n';
        }
        docs[dev] = std::move(text);
    }
    return docs;
}

/// Event-driven run. Every edge transmits once per send_period starting at a
/// seeded phase in [0, send_period); each packet's path is fixed from the
/// routing in force at its send instant. Packets still in flight at `duration`
/// are carried to completion.
inline SimResult run_simulation(const Topology& topology, const SimConfig& cfg,
                                const std::optional<AttackPlan>& plan = std::nullopt) {
    using detail::Event;
    using detail::EventKind;
    cfg.validate();
    if (plan && plan->attack_end() > cfg.duration)
        throw ConfigError("attack interval extends past the simulated duration");

    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    std::uint64_t seq = 0;

    std::vector<NodeId> edges;
    for (auto n : topology.nodes)
        if (n.is_edge()) edges.push_back(n);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto phase = Micros{static_cast<long long>(unit(rng) * static_cast<double>(cfg.send_period.count()))};
        queue.push({phase, seq++, EventKind::Send, i});
    }

    auto skew = [&](NodeId n) {
        auto it = cfg.clock_skew.find(n);
        return it == cfg.clock_skew.end() ? Micros::zero() : it->second;
    };
    auto stamp = [&](NodeId n, Micros at) { return cfg.start_time + at + skew(n); };

    std::vector<PacketTrace> traces;
    std::vector<detail::InFlight> flight;

    auto transmit = [&](std::size_t p, Micros at) {
        auto& tr = traces[p];
        auto& f = flight[p];
        const NodeId from = f.path[f.next_hop];
        const NodeId to = f.path[f.next_hop + 1];
        tr.hops.push_back({from, to, stamp(from, at), std::nullopt});
        const bool drop = cfg.drop_probability > 0 && unit(rng) < cfg.drop_probability;
        tr.status_per_hop.push_back(drop ? 1 : 0);
        if (drop) return;
        queue.push({at + sample_hop_delay(rng, cfg.hop_delay), seq++, EventKind::Arrive, p});
    };

    while (!queue.empty()) {
        const Event ev = queue.top();
        queue.pop();
        switch (ev.kind) {
        case EventKind::Send: {
            const NodeId edge = edges[ev.subject];
            const Topology live = plan ? apply_plan(topology, *plan, ev.at) : topology;
            auto route = route_path(live, edge);
            PacketTrace tr;
            tr.id = traces.size();
            tr.origin = edge;
            tr.loop = route.loop;
            traces.push_back(std::move(tr));
            flight.push_back({std::move(route.nodes), 0});
            transmit(traces.size() - 1, ev.at);
            const auto next = ev.at + cfg.send_period;
            if (next < cfg.duration) queue.push({next, seq++, EventKind::Send, ev.subject});
            break;
        }
        case EventKind::Arrive: {
            auto& tr = traces[ev.subject];
            auto& f = flight[ev.subject];
            const NodeId at = f.path[f.next_hop + 1];
            tr.hops.back().received_at = stamp(at, ev.at);
            ++f.next_hop;
            if (at.is_coordinator() || at.is_attacker()) {
                tr.delivered_to = at;
            } else if (f.next_hop + 1 < f.path.size()) {
                queue.push({ev.at + sample_hop_delay(rng, cfg.forward_delay), seq++, EventKind::Forward, ev.subject});
            }
            // otherwise the hop limit was reached: the packet is discarded here
            break;
        }
        case EventKind::Forward:
            transmit(ev.subject, ev.at);
            break;
        }
    }

    SimResult res;
    res.logs = render_logs(traces);
    res.traces = std::move(traces);
    return res;
}

} // namespace fedids

#endif // FEDIDS_SIMKERNEL_HPP
