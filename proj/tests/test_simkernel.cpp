#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "fedids/attacks.hpp"
#include "fedids/logfmt.hpp"
#include "fedids/simkernel.hpp"

using namespace fedids;
using namespace std::chrono_literals;

namespace {
const NodeId C = NodeId::coordinator(), A = NodeId::attacker();
const NodeId R1 = NodeId::router(1), R2 = NodeId::router(2);
const NodeId E1 = NodeId::edge(1);

SimConfig short_cfg(Micros duration = 60s, std::uint64_t seed = 11) {
    SimConfig c;
    c.seed = seed;
    c.duration = duration;
    return c;
}

Micros median_of(std::vector<Micros> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}
} // namespace

TEST(HopDelay, DegenerateSigmaReturnsMedian) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_hop_delay(rng, {120.0, 0.0}), Micros{120000});
}

TEST(HopDelay, EmpiricalMedianNearConfigured) {
    Rng rng(5);
    std::vector<Micros> xs;
    for (int i = 0; i < 10000; ++i) xs.push_back(sample_hop_delay(rng, {}));
    const double med = to_ms(median_of(xs));
    EXPECT_NEAR(med, 120.0, 12.0);
    for (auto x : xs) EXPECT_GT(x, Micros{0});
}

TEST(HopDelay, CoversObservedHopDelays) {
    // hop delays seen in real testbed logs: 63.568 ms .. 265.085 ms
    Rng rng(6);
    std::vector<double> xs;
    for (int i = 0; i < 10000; ++i) xs.push_back(to_ms(sample_hop_delay(rng, {})));
    std::sort(xs.begin(), xs.end());
    const double p025 = xs[250], p975 = xs[9750];
    EXPECT_LT(p025, 63.568);
    EXPECT_GT(p975, 265.085);
}

TEST(Simulation, OnePacketPerEdgePerPeriod) {
    auto res = run_simulation(build_topology(ScenarioFamily::I), short_cfg());
    EXPECT_EQ(res.traces.size(), 240u);
    std::map<NodeId, int> per_edge;
    for (const auto& t : res.traces) ++per_edge[t.origin];
    for (auto e : kEdges) EXPECT_EQ(per_edge[e], 60);
}

TEST(Simulation, Deterministic) {
    auto topo = build_topology(ScenarioFamily::III);
    AttackPlan plan{{ScenarioFamily::III, R1, A}, 1min, 1min, 1min};
    auto a = run_simulation(topo, short_cfg(3min), plan);
    auto b = run_simulation(topo, short_cfg(3min), plan);
    EXPECT_EQ(a.logs, b.logs);
    EXPECT_EQ(a.traces, b.traces);
    auto c = run_simulation(topo, short_cfg(3min, 12), plan);
    EXPECT_NE(a.logs, c.logs);
}

TEST(Simulation, TraceInvariants) {
    auto res = run_simulation(build_topology(ScenarioFamily::I), short_cfg(2min));
    for (const auto& t : res.traces) {
        ASSERT_FALSE(t.hops.empty());
        EXPECT_EQ(t.hops.front().from, t.origin);
        EXPECT_EQ(t.hops.size(), t.status_per_hop.size());
        for (std::size_t i = 0; i < t.hops.size(); ++i) {
            ASSERT_TRUE(t.hops[i].received_at);
            EXPECT_LT(t.hops[i].sent_at, *t.hops[i].received_at);
            if (i + 1 < t.hops.size()) {
                EXPECT_EQ(t.hops[i].to, t.hops[i + 1].from);
                EXPECT_LE(*t.hops[i].received_at, t.hops[i + 1].sent_at);
            }
        }
        ASSERT_TRUE(t.delivered_to);
        EXPECT_EQ(*t.delivered_to, C);
        EXPECT_GT(*t.hops.back().received_at - t.hops.front().sent_at, Micros{0});
    }
}

TEST(Simulation, LogsParseAndConserve) {
    auto res = run_simulation(build_topology(ScenarioFamily::I), short_cfg(2min));
    EXPECT_FALSE(res.logs.count(A));
    std::map<NodeId, std::vector<LogEntry>> logs;
    for (const auto& [dev, text] : res.logs) logs[dev] = parse_log(text);

    // every packet appears in exactly one origin edge log
    std::size_t edge_lines = 0;
    for (auto e : kEdges) {
        edge_lines += logs[e].size();
        for (const auto& en : logs[e]) {
            EXPECT_EQ(en.kind, EntryKind::Edge);
            EXPECT_EQ(en.origin(), e);
        }
    }
    EXPECT_EQ(edge_lines, res.traces.size());
    EXPECT_EQ(logs[C].size(), res.traces.size());

    // every router entry is a prefix of exactly one coordinator entry
    std::map<std::string, int> prefixes;
    for (const auto& ce : logs[C])
        for (std::size_t n = 2; n <= ce.segments.size(); ++n) {
            LogEntry p = ce;
            p.segments.resize(n);
            p.segments.back().received_at.reset();
            p.kind = EntryKind::Router;
            p.status = 0;
            ++prefixes[serialize_entry(p)];
        }
    for (auto r : kRouters)
        for (const auto& re : logs[r]) {
            EXPECT_EQ(re.kind, EntryKind::Router);
            EXPECT_EQ(re.segments.back().from, r);
            EXPECT_EQ(prefixes[serialize_entry(re)], 1);
        }
}

TEST(Simulation, ThreeHopPathInScenarioOne) {
    auto res = run_simulation(build_topology(ScenarioFamily::I), short_cfg(10s));
    for (const auto& t : res.traces) {
        if (t.origin == NodeId::edge(3)) {
            EXPECT_EQ(t.hops.size(), 3u);
        }
    }
}

TEST(Simulation, RedirectedPacketsNeverReachCoordinator) {
    auto topo = build_topology(ScenarioFamily::III);
    AttackPlan plan{{ScenarioFamily::III, E1, A}};
    auto cfg = short_cfg(plan.total());
    auto res = run_simulation(topo, cfg, plan);
    const auto lo = cfg.start_time + plan.attack_begin(), hi = cfg.start_time + plan.attack_end();

    // oracle: the traces themselves
    std::size_t to_attacker = 0;
    for (const auto& t : res.traces) {
        const bool during = t.origin == E1 && t.hops.front().sent_at >= lo && t.hops.front().sent_at < hi;
        if (during) {
            ++to_attacker;
            EXPECT_EQ(*t.delivered_to, A);
            EXPECT_EQ(t.hops.size(), 1u);
        } else {
            EXPECT_EQ(*t.delivered_to, C);
        }
    }
    EXPECT_EQ(to_attacker, 300u);
    for (const auto& e : parse_log(res.logs.at(C))) {
        if (e.origin() == E1) {
            EXPECT_FALSE(e.first_sent() >= lo && e.first_sent() < hi);
        }
    }
}

TEST(Simulation, RouterRedirectionBypassesParent) {
    auto topo = build_topology(ScenarioFamily::III);
    AttackPlan plan{{ScenarioFamily::III, R1, A}, 1min, 1min, 1min};
    auto res = run_simulation(topo, short_cfg(plan.total()), plan);
    std::size_t lost = 0;
    for (const auto& t : res.traces)
        if (t.delivered_to == A) {
            ++lost;
            EXPECT_EQ(t.hops.back().from, R1);
        }
    EXPECT_EQ(lost, 120u); // E1 and E2 for one minute
}

TEST(Simulation, LoopingRoutesHitHopLimit) {
    auto topo = set_destination(set_destination(build_topology(ScenarioFamily::II), R1, R2), R2, R1);
    auto res = run_simulation(topo, short_cfg(5s));
    for (const auto& t : res.traces)
        if (t.origin == E1) {
            EXPECT_TRUE(t.loop);
            EXPECT_FALSE(t.delivered_to);
            EXPECT_EQ(t.hops.size(), kHopLimit);
        }
}

TEST(Simulation, DropKnob) {
    auto cfg = short_cfg(10s);
    cfg.drop_probability = 1.0;
    auto res = run_simulation(build_topology(ScenarioFamily::I), cfg);
    for (const auto& t : res.traces) {
        EXPECT_TRUE(t.dropped());
        EXPECT_EQ(t.status_per_hop, std::vector<int>{1});
    }
    EXPECT_TRUE(res.logs.at(C).empty());
}

TEST(Simulation, ClockSkewShiftsOneDevice) {
    auto cfg = short_cfg(10s);
    auto base = run_simulation(build_topology(ScenarioFamily::I), cfg);
    cfg.clock_skew[R1] = Micros{5000};
    auto skewed = run_simulation(build_topology(ScenarioFamily::I), cfg);
    ASSERT_EQ(base.traces.size(), skewed.traces.size());
    for (std::size_t i = 0; i < base.traces.size(); ++i)
        for (std::size_t h = 0; h < base.traces[i].hops.size(); ++h) {
            const auto& b = base.traces[i].hops[h];
            const auto& s = skewed.traces[i].hops[h];
            EXPECT_EQ(s.sent_at - b.sent_at, b.from == R1 ? Micros{5000} : Micros{0});
        }
}

TEST(Simulation, InvalidConfig) {
    auto topo = build_topology(ScenarioFamily::I);
    auto cfg = short_cfg();
    cfg.send_period = Micros{0};
    EXPECT_THROW(run_simulation(topo, cfg), ConfigError);
    cfg = short_cfg();
    cfg.hop_delay.sigma = -1;
    EXPECT_THROW(run_simulation(topo, cfg), ConfigError);
    cfg = short_cfg();
    cfg.hop_delay.median_ms = 0;
    EXPECT_THROW(run_simulation(topo, cfg), ConfigError);
    AttackPlan plan{{ScenarioFamily::I, E1, R2}};
    EXPECT_THROW(run_simulation(topo, short_cfg(10min), plan), ConfigError);
}

TEST(Simulation, LogFileNamesAreNodeTokens) {
    auto res = run_simulation(build_topology(ScenarioFamily::I), short_cfg(2s));
    for (const auto& [dev, text] : res.logs) EXPECT_FALSE(dev.is_attacker());
    EXPECT_EQ(res.logs.size(), kRoster.size() - 1);
    EXPECT_TRUE(res.logs.count(R2));
}
