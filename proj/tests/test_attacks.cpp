#include <set>

#include <gtest/gtest.h>

#include "fedids/attacks.hpp"

using namespace fedids;
using namespace std::chrono_literals;

namespace {
const NodeId C = NodeId::coordinator(), A = NodeId::attacker();
const NodeId R1 = NodeId::router(1), R2 = NodeId::router(2), R3 = NodeId::router(3);
const NodeId E1 = NodeId::edge(1), E4 = NodeId::edge(4);

bool contains(const std::vector<AttackSpec>& v, NodeId t, NodeId d) {
    for (const auto& s : v)
        if (s.target == t && s.new_dest == d) return true;
    return false;
}
} // namespace

TEST(Catalogue, Counts) {
    EXPECT_EQ(enumerate_attacks(ScenarioFamily::I).size(), 12u);
    EXPECT_EQ(enumerate_attacks(ScenarioFamily::II).size(), 5u);
    EXPECT_EQ(enumerate_attacks(ScenarioFamily::III).size(), 7u);
}

TEST(Catalogue, ScenarioOneEntries) {
    auto I = enumerate_attacks(ScenarioFamily::I);
    EXPECT_TRUE(contains(I, E1, R2));
    EXPECT_TRUE(contains(I, E1, R3));
    EXPECT_TRUE(contains(I, E1, C));
    EXPECT_TRUE(contains(I, E4, R1));
    EXPECT_FALSE(contains(I, E1, R1));
}

TEST(Catalogue, ScenarioTwoIsVerbatim) {
    auto II = enumerate_attacks(ScenarioFamily::II);
    std::vector<std::string> tokens;
    for (const auto& s : II) tokens.push_back(s.token());
    EXPECT_EQ(tokens, (std::vector<std::string>{"R1>R2", "R1>R3", "R2>R1", "R3>R1", "R3>C"}));
}

TEST(Catalogue, ScenarioThreeTargetsAttacker) {
    for (const auto& s : enumerate_attacks(ScenarioFamily::III)) EXPECT_EQ(s.new_dest, A);
}

TEST(Catalogue, TwentyFourDistinctSpecsNoneOnNormalRoute) {
    std::set<std::string> seen;
    for (auto f : {ScenarioFamily::I, ScenarioFamily::II, ScenarioFamily::III})
        for (const auto& s : enumerate_attacks(f)) {
            seen.insert(s.slug());
            EXPECT_NE(build_topology(f).normal_dest.at(s.target), s.new_dest) << s.slug();
            EXPECT_NO_THROW(validate_spec(s));
        }
    EXPECT_EQ(seen.size(), 24u);
}

TEST(Catalogue, ParseAttackValidates) {
    EXPECT_EQ(parse_attack(ScenarioFamily::III, "R1>A").target, R1);
    EXPECT_THROW(parse_attack(ScenarioFamily::III, "E1>R2"), InvalidRedirection);
    EXPECT_THROW(parse_attack(ScenarioFamily::I, "E1>R1"), InvalidRedirection);
    EXPECT_THROW(parse_attack(ScenarioFamily::II, "E1>R2"), InvalidRedirection);
    EXPECT_THROW(parse_attack(ScenarioFamily::I, "E9>R2"), UnknownNode);
}

TEST(Plan, DefaultSchedule) {
    AttackPlan p{{ScenarioFamily::I, E4, R1}};
    EXPECT_EQ(p.total(), Micros{35min});
    EXPECT_EQ(p.attack_begin(), Micros{20min});
    EXPECT_EQ(p.attack_end(), Micros{25min});
}

TEST(Plan, ApplyOverTime) {
    const auto base = build_topology(ScenarioFamily::I);
    AttackPlan p{{ScenarioFamily::I, E4, R1}};
    EXPECT_EQ(apply_plan(base, p, Micros{0}), base);
    auto mid = apply_plan(base, p, Micros{22min});
    EXPECT_EQ(mid.current_dest.at(E4), R1);
    EXPECT_EQ(apply_plan(mid, p, Micros{22min}), mid); // idempotent
    EXPECT_EQ(apply_plan(base, p, Micros{26min}).current_dest, base.normal_dest);
    EXPECT_EQ(apply_plan(base, p, Micros{25min}).current_dest, base.normal_dest); // half-open interval
    EXPECT_EQ(apply_plan(base, p, Micros{20min}).current_dest.at(E4), R1);
}

TEST(Plan, ScenarioThreeRoutesTerminateAtAttacker) {
    const auto base = build_topology(ScenarioFamily::III);
    for (const auto& s : enumerate_attacks(ScenarioFamily::III)) {
        AttackPlan p{s};
        auto t = apply_plan(base, p, Micros{21min});
        EXPECT_EQ(route_path(t, s.target).terminal(), A) << s.slug();
    }
}

TEST(Plan, TextRoundTrip) {
    AttackPlan p{{ScenarioFamily::II, R3, C}, 10min, 2min, 3min};
    EXPECT_EQ(parse_plan(serialize_plan(p)), p);
    EXPECT_THROW(parse_plan("scenario = II\n"), ConfigError);
    EXPECT_THROW(parse_plan("attack = R3>C\nbogus = 1\n"), ConfigError);
}

TEST(Labels, DefaultPlan) {
    auto labels = label_windows(AttackPlan{{ScenarioFamily::III, E1, A}}, 1min);
    ASSERT_EQ(labels.size(), 35u);
    for (const auto& l : labels)
        EXPECT_EQ(l.truth, l.window_index >= 20 && l.window_index <= 24 ? Truth::Attack : Truth::Normal);
}

TEST(Labels, ZeroLengthAttack) {
    AttackPlan p{{ScenarioFamily::III, E1, A}, 20min, 0min, 10min};
    for (const auto& l : label_windows(p, 1min)) EXPECT_EQ(l.truth, Truth::Normal);
}

TEST(Labels, HalfMinuteWindowsMatchOverlapOracle) {
    AttackPlan p{{ScenarioFamily::III, E1, A}};
    auto labels = label_windows(p, 30s);
    ASSERT_EQ(labels.size(), 70u);
    // independent oracle: window i covers [30i, 30i+30) seconds; attack covers [1200, 1500)
    std::size_t attack = 0;
    for (std::size_t i = 0; i < 70; ++i) {
        const long lo = 30 * static_cast<long>(i), hi = lo + 30;
        const bool overlap = lo < 1500 && 1200 < hi;
        EXPECT_EQ(labels[i].truth == Truth::Attack, overlap) << i;
        attack += overlap;
    }
    EXPECT_EQ(attack, 10u);
}

TEST(Labels, MisalignedAttackMarksBothWindows) {
    AttackPlan p{{ScenarioFamily::III, E1, A}, 90s, 60s, 90s};
    auto labels = label_windows(p, 1min);
    ASSERT_EQ(labels.size(), 4u);
    EXPECT_EQ(labels[0].truth, Truth::Normal);
    EXPECT_EQ(labels[1].truth, Truth::Attack);
    EXPECT_EQ(labels[2].truth, Truth::Attack);
    EXPECT_EQ(labels[3].truth, Truth::Normal);
}

TEST(Labels, WindowMustDivideAMinute) {
    AttackPlan p{{ScenarioFamily::III, E1, A}};
    EXPECT_THROW(label_windows(p, 7s), ConfigError);
    EXPECT_THROW(label_windows(p, 0s), ConfigError);
}
