// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//   acceptance <work-dir> [path to fedids_cli]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <random>
#include <string>

#include <fmt/core.h>

#include "fedids/harness.hpp"
#include "gradcheck.hpp"
#include "logfuzz.hpp"
#include "reference_tables.hpp"
#include "treecheck.hpp"

using namespace fedids;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path g_work;
std::string g_cli;

ExperimentConfig default_config(const fs::path& out) {
    ExperimentConfig c;
    c.out = out;
    return c;
}

// The default Scenario III run, shared by the criteria that inspect a bundle.
struct DefaultRun {
    ExperimentConfig config;
    ExperimentResult result;
    double seconds = 0;
};

const DefaultRun& default_run() {
    static std::optional<DefaultRun> run;
    if (!run) {
        DefaultRun r;
        r.config = default_config(g_work / "run_a");
        fs::remove_all(r.config.out);
        const auto t0 = Clock::now();
        r.result = run_experiment(r.config);
        r.seconds = seconds_since(t0);
        run = std::move(r);
    }
    return *run;
}

Check tree_equivalence() {
    const auto t0 = Clock::now();
    double worst = 0;
    int exact = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto o = treecheck::check_roster(1000 + s);
        worst = std::max(worst, o.float_error);
        exact += o.double_exact;
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && exact == 100 && secs < 10,
            fmt::format("100 rosters, max f32 error {:.3g}, {} exact at f64, {:.2f} s", worst, exact, secs)};
}

Check gradient_check() {
    const auto t0 = Clock::now();
    double worst = 0;
    for (std::uint64_t s = 0; s < 20; ++s) worst = std::max(worst, gradcheck::check_random_model(500 + s));
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 30, fmt::format("20 models, max relative error {:.3g}, {:.2f} s", worst, secs)};
}

Check detection_table() {
    double worst = 0;
    for (const auto& r : reference::kDetection) worst = std::max(worst, std::abs(f1_score(r.precision, r.recall) - r.f1));
    return {worst <= 5e-4, fmt::format("{} triples, max |F1 - printed| {:.2g}", reference::kDetection.size(), worst)};
}

Check threshold_table() {
    double worst = 0;
    for (const auto& row : reference::kThresholds) {
        const double std = row.value[1] - row.value[0];
        const double mean = row.value[0] - std;
        // two losses mean -/+ std have exactly that mean and population std
        const std::vector<double> val{mean - std, mean + std};
        for (int k = 3; k <= 4; ++k)
            worst = std::max(worst, std::abs(calibrate_threshold(val, k).value - row.value[k - 1]));
    }
    return {worst <= 1e-4 + 1e-12, fmt::format("6 rows, max |predicted - printed| at k=3,4 {:.2g}", worst)};
}

Check overhead() {
    const auto ref = overhead_report(OverheadModel::reference());
    const auto payload = serialize_weights(ModelWeights<float>::glorot(Architecture::standard(), 1)).size();
    const auto& run = default_run();
    const auto ledger = read_ledger(layout(run.config, ScenarioFamily::III).models() / "comms_ledger.csv");
    const auto total = ledger_bytes(ledger);
    const std::uint64_t rounding = ledger.size() * (12'600 - 12'540);
    const bool ok = ref.centralized_total == 4'500'000 && ref.federated_total == 378'000 && payload >= 12'540 &&
                    payload <= 12'600 && ledger.size() == 30 && total == ledger.size() * payload &&
                    total + rounding >= 378'000 && total <= 378'000;
    return {ok, fmt::format("reference {} B / {} B; payload {} B; ledger {} messages, {} B", ref.centralized_total,
                            ref.federated_total, payload, ledger.size(), total)};
}

Check log_grammar() {
    const std::string coord =
        "E3>R3,2024-04-26 13:36:10.273312, 2024-04-26 13:36:10.336880, R3>R2,2024-04-26 13:36:10.369257, "
        "2024-04-26 13:36:10.488817, R2>C,2024-04-26 13:36:10.522766, 2024-04-26 13:36:10.787851";
    const std::string router =
        "E3>R3,2024-04-26 13:36:10.273312, 2024-04-26 13:36:10.336880, R3>R2,2024-04-26 13:36:10.369257, S:0";
    const std::string edge = "E3 > R3, 2024-04-26 13:36:10.273312, S:0";
    const auto c = parse_entry(coord), r = parse_entry(router), e = parse_entry(edge);
    bool examples = c.kind == EntryKind::Coordinator && c.segments.size() == 3 && !c.status &&
                    c.segments[2].to == NodeId::coordinator() && r.kind == EntryKind::Router &&
                    r.segments.size() == 2 && !r.segments[1].received_at && r.status == 0 &&
                    e.kind == EntryKind::Edge && e.segments.size() == 1 && e.status == 0;
    for (const auto& line : {coord, router, edge})
        examples = examples && serialize_entry(parse_entry(line)) == normalize_whitespace(line);

    std::mt19937_64 rng(424242);
    int round_trips = 0;
    for (int i = 0; i < 10'000; ++i) {
        const auto entry = logfuzz::random_entry(rng);
        const auto text = serialize_entry(entry);
        try {
            const auto back = parse_entry(text);
            round_trips += back == entry && serialize_entry(back) == text;
        } catch (const ParseError&) {
        }
    }
    int crashes = 0;
    std::uniform_int_distribution<int> len(0, 160), byte(0, 255);
    for (int i = 0; i < 100'000; ++i) {
        std::string s;
        for (int n = len(rng); n > 0; --n) s.push_back(static_cast<char>(byte(rng)));
        if (i % 2) { // half of them start from a valid entry
            s = serialize_entry(logfuzz::random_entry(rng));
            s[static_cast<std::size_t>(byte(rng)) % s.size()] = static_cast<char>(byte(rng));
        }
        try {
            parse_entry(s);
        } catch (const ParseError&) {
        } catch (...) {
            ++crashes;
        }
    }
    return {examples && round_trips == 10'000 && crashes == 0,
            fmt::format("examples {}, {} / 10000 round-trips, {} unexpected failures on 100000 byte strings",
                        examples ? "ok" : "wrong", round_trips, crashes)};
}

Check features() {
    const std::vector<LogEntry> es{parse_entry(
        "E3>R3,2024-04-26 13:36:10.273312, 2024-04-26 13:36:10.336880, R3>R2,2024-04-26 13:36:10.369257, "
        "2024-04-26 13:36:10.488817, R2>C,2024-04-26 13:36:10.522766, 2024-04-26 13:36:10.787851")};
    const auto v = extract_window(es, es[0].first_sent(), NodeId::coordinator(), FeatureSchema::coordinator());
    const bool example = v.values.size() == kFeatureCount && std::abs(v.values[slot::e2e_mean] - 514.539) <= 1e-3 &&
                         std::abs(v.values[slot::fh_mean] - 63.568) <= 1e-3 && v.values[slot::avg_hops] == 3;

    // every feature file of the default bundle carries 31 value columns
    std::size_t files = 0, rows = 0, bad = 0;
    std::set<std::string> levels;
    for (const auto& e : fs::recursive_directory_iterator(default_run().config.out)) {
        if (!e.is_regular_file() || e.path().parent_path().filename() != "features") continue;
        const auto t = io::Table::parse(io::read_file(e.path()));
        ++files;
        levels.insert(e.path().filename().string().substr(0, e.path().filename().string().find('_')));
        if (t.header.size() != 4 + kFeatureCount) ++bad;
        for (const auto& r : t.rows) {
            ++rows;
            if (r.size() != 4 + kFeatureCount) ++bad;
        }
    }
    return {example && bad == 0 && files > 0 && levels.size() == 2,
            fmt::format("example e2e {:.3f} ms, first hop {:.3f} ms, hops {}; {} files / {} windows, {} malformed",
                        v.values[slot::e2e_mean], v.values[slot::fh_mean], v.values[slot::avg_hops], files, rows, bad)};
}

Check detectability() {
    const auto& run = default_run();
    const auto& fam = run.result.families.at(0);
    std::size_t ok = 0;
    std::string worst;
    double min_recall = 1, max_fpr = 0;
    for (const auto& o : fam.outcomes) {
        const bool pass = o.metrics.recall >= 0.6 && o.metrics.false_positive_rate <= 0.2;
        ok += pass;
        min_recall = std::min(min_recall, o.metrics.recall);
        max_fpr = std::max(max_fpr, o.metrics.false_positive_rate);
        if (!pass)
            worst += fmt::format(" {}:{}(rec {:.2f} fpr {:.2f})", o.spec.token(), to_string(o.mode), o.metrics.recall,
                                 o.metrics.false_positive_rate);
    }
    const std::size_t expected = enumerate_attacks(ScenarioFamily::III).size() * 2;
    return {ok == expected && fam.outcomes.size() == expected && run.seconds < 900,
            fmt::format("{}/{} attack-mode pairs pass, min recall {:.3f}, max fpr {:.3f}, {:.1f} s{}", ok, expected,
                        min_recall, max_fpr, run.seconds, worst)};
}

// Relative path -> content of every file under root.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
    return out;
}

void run_all(const fs::path& out) {
    fs::remove_all(out);
    if (g_cli.empty()) {
        run_experiment(default_config(out));
        return;
    }
    const auto cmd = fmt::format("\"{}\" run-all --seed 2024 --out \"{}\" > \"{}.log\" 2>&1", g_cli, out.string(),
                                 out.string());
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("run-all failed: " + cmd);
}

Check determinism() {
    const auto& a = default_run();
    run_all(g_work / "run_b");
    run_all(g_work / "run_c");
    const auto sa = snapshot(a.config.out), sb = snapshot(g_work / "run_b"), sc = snapshot(g_work / "run_c");
    std::size_t bytes = 0;
    for (const auto& [p, d] : sb) bytes += d.size();
    std::size_t diffs = 0;
    std::string first;
    for (const auto* other : {&sa, &sc})
        for (const auto& [p, d] : sb) {
            auto it = other->find(p);
            if (it == other->end() || it->second != d) {
                ++diffs;
                if (first.empty()) first = " first difference: " + p;
            }
        }
    const bool ok = diffs == 0 && sa.size() == sb.size() && sc.size() == sb.size();
    return {ok, fmt::format("{} twice, seed 2024: {} files, {} bytes, {} differences against each other and the "
                            "in-process run{}",
                            g_cli.empty() ? "run_experiment" : "run-all", sb.size(), bytes, diffs, first)};
}

} // namespace

int main(int argc, char** argv) {
    g_work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-work");
    g_cli = argc > 2 ? argv[2] : "";
    fs::create_directories(g_work);

    const std::vector<std::function<Check()>> criteria{tree_equivalence, gradient_check, detection_table,
                                                         threshold_table,  overhead,       log_grammar,
                                                         features,         detectability,  determinism};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check v;
        try {
            v = criteria[i]();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("criterion %zu: %s - %s\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
