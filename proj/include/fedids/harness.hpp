#ifndef FEDIDS_HARNESS_HPP
#define FEDIDS_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fedids/attacks.hpp"
#include "fedids/autoencoder.hpp"
#include "fedids/csv.hpp"
#include "fedids/detect.hpp"
#include "fedids/error.hpp"
#include "fedids/features.hpp"
#include "fedids/federated.hpp"
#include "fedids/logfmt.hpp"
#include "fedids/netmodel.hpp"
#include "fedids/simkernel.hpp"
#include "fedids/timestamp.hpp"

namespace fedids {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- overhead

/// Bytes moved to train the detectors, centralized vs federated.
struct OverheadModel {
    std::vector<std::uint64_t> centralized_bytes; // raw data each router ships to C
    std::uint64_t payload_bytes = 0;              // one serialized model
    int rounds = 0;

    /// 3 routers x 1.5 MB, 12.6 KB models, 5 rounds.
    static OverheadModel reference() { return {{1'500'000, 1'500'000, 1'500'000}, 12'600, 5}; }
};

struct OverheadReport {
    std::uint64_t centralized_total = 0;
    std::uint64_t federated_total = 0; // uplink + downlink, every router, every round
    double ratio = 0;                  // federated / centralized
    double reduction = 0;              // 1 - ratio
};

inline OverheadReport overhead_report(const OverheadModel& m) {
    if (m.centralized_bytes.empty()) throw EmptyRoster("overhead model has no routers");
    if (m.rounds < 0) throw ConfigError("negative round count");
    OverheadReport r;
    for (auto b : m.centralized_bytes) r.centralized_total += b;
    r.federated_total = m.payload_bytes * 2 * static_cast<std::uint64_t>(m.rounds) * m.centralized_bytes.size();
    r.ratio = r.centralized_total ? static_cast<double>(r.federated_total) / static_cast<double>(r.centralized_total) : 0;
    r.reduction = 1 - r.ratio;
    return r;
}

// ------------------------------------------------------------- configuration

enum class Mode { Centralized, Federated };

inline std::string to_string(Mode m) { return m == Mode::Centralized ? "central" : "fed"; }

struct ExperimentConfig {
    std::vector<ScenarioFamily> families{ScenarioFamily::III};
    std::vector<std::string> attacks; // tokens such as "R1>A"; empty runs the whole catalogue
    std::uint64_t seed = 2024;
    SimConfig sim;

    Micros pretrain_duration = std::chrono::hours{1};
    Micros normal_duration = std::chrono::hours{5};
    Micros window_len = std::chrono::minutes{1};
    double validation_fraction = 0.2;

    Micros normal_before = std::chrono::minutes{20};
    Micros attack_window = std::chrono::minutes{5};
    Micros normal_after = std::chrono::minutes{10};

    Architecture arch = Architecture::standard();
    TrainConfig pretrain_train;
    TrainConfig central_train;
    FLConfig fl;

    std::vector<double> ks = default_ks();
    std::vector<Mode> modes{Mode::Centralized, Mode::Federated};
    ScalePolicy scale_policy = ScalePolicy::Extrapolate;
    bool evaluate_coordinator = false;
    std::size_t workers = 0; // 0: hardware concurrency
    fs::path out = "fedids-out";

    void validate() const {
        if (families.empty()) throw ConfigError("no scenario family selected");
        sim.validate();
        arch.validate();
        pretrain_train.validate();
        central_train.validate();
        fl.validate();
        if (ks.empty()) throw ConfigError("k sweep needs at least one k");
        if (modes.empty()) throw ConfigError("no detector mode selected");
        if (window_len <= Micros::zero() || Micros{std::chrono::minutes{1}} % window_len != Micros::zero())
            throw ConfigError("window length must divide one minute evenly");
        for (auto d : {pretrain_duration, fl.round_interval})
            if (d <= Micros::zero() || d % window_len != Micros::zero())
                throw ConfigError("durations must be positive multiples of the window length");
        if (fl.round_interval * fl.rounds > normal_duration)
            throw ConfigError("rounds x round_interval exceeds the normal corpus");
        if (!(validation_fraction > 0 && validation_fraction < 1)) throw ConfigError("validation_fraction outside (0,1)");
        const auto per_round = static_cast<std::size_t>(fl.round_interval / window_len);
        const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(per_round)));
        if (n_val < 1 || n_val >= per_round) throw ConfigError("round chunk too short for a train/validation split");
        if (arch.dims.front() != kFeatureCount || arch.dims.back() != kFeatureCount)
            throw ConfigError("architecture must map " + std::to_string(kFeatureCount) + " features to themselves");
        for (const auto& t : attacks)
            for (auto f : families) parse_attack(f, t);
    }
};

/// Independent stream seed for a named purpose.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = master ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::string duration_str(Micros d) { return std::to_string(d.count()) + "us"; }

/// Resolved settings as key = value lines; written into the bundle manifest.
inline std::string describe(const ExperimentConfig& c) {
    std::string fam, modes, ks, atk;
    for (auto f : c.families) fam += (fam.empty() ? "" : " ") + to_string(f);
    for (auto m : c.modes) modes += (modes.empty() ? "" : " ") + to_string(m);
    for (auto k : c.ks) ks += (ks.empty() ? "" : " ") + io::num(k);
    for (const auto& a : c.attacks) atk += (atk.empty() ? "" : " ") + a;
    std::string s;
    auto kv = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    kv("scenario", fam);
    kv("attacks", atk.empty() ? "all" : atk);
    kv("seed", std::to_string(c.seed));
    kv("send_period", duration_str(c.sim.send_period));
    kv("hop_delay_median_ms", io::num(c.sim.hop_delay.median_ms));
    kv("hop_delay_sigma", io::num(c.sim.hop_delay.sigma));
    kv("forward_delay_median_ms", io::num(c.sim.forward_delay.median_ms));
    kv("forward_delay_sigma", io::num(c.sim.forward_delay.sigma));
    kv("drop_probability", io::num(c.sim.drop_probability));
    kv("start_time", format_timestamp(c.sim.start_time));
    kv("pretrain_duration", duration_str(c.pretrain_duration));
    kv("normal_duration", duration_str(c.normal_duration));
    kv("window", duration_str(c.window_len));
    kv("validation_fraction", io::num(c.validation_fraction));
    kv("normal_before", duration_str(c.normal_before));
    kv("attack_window", duration_str(c.attack_window));
    kv("normal_after", duration_str(c.normal_after));
    kv("architecture", c.arch.tag());
    kv("epochs", std::to_string(c.central_train.epochs));
    kv("pretrain_epochs", std::to_string(c.pretrain_train.epochs));
    kv("local_epochs", std::to_string(c.fl.local_train.epochs));
    kv("batch_size", std::to_string(c.central_train.batch_size));
    kv("learning_rate", io::num(c.central_train.learning_rate));
    kv("rounds", std::to_string(c.fl.rounds));
    kv("round_interval", duration_str(c.fl.round_interval));
    kv("ks", ks);
    kv("modes", modes);
    kv("scale_policy", to_string(c.scale_policy));
    kv("evaluate_coordinator", c.evaluate_coordinator ? "true" : "false");
    return s;
}

// -------------------------------------------------------------- bundle paths

struct FamilyLayout {
    fs::path root;

    fs::path normal_logs() const { return root / "normal" / "logs"; }
    fs::path normal_features() const { return root / "normal" / "features"; }
    fs::path models() const { return root / "models"; }
    fs::path thresholds() const { return root / "thresholds.csv"; }
    fs::path attack(const AttackSpec& s) const { return root / "attacks" / s.slug(); }
};

inline FamilyLayout layout(const ExperimentConfig& c, ScenarioFamily f) {
    return {c.out / ("scenario_" + to_string(f))};
}

inline std::vector<AttackSpec> selected_attacks(const ExperimentConfig& c, ScenarioFamily f) {
    if (c.attacks.empty()) return enumerate_attacks(f);
    std::vector<AttackSpec> out;
    for (const auto& t : c.attacks) out.push_back(parse_attack(f, t));
    return out;
}

inline AttackPlan plan_for(const ExperimentConfig& c, const AttackSpec& s) {
    return {s, c.normal_before, c.attack_window, c.normal_after};
}

/// Devices a mode scores windows on. The centralized model also covers C
/// when coordinator-level evaluation is enabled.
inline std::vector<NodeId> devices(const ExperimentConfig& c, Mode m) {
    auto v = canonical_roster(c.fl.client_roster);
    if (m == Mode::Centralized && c.evaluate_coordinator) v.push_back(NodeId::coordinator());
    return v;
}

inline std::string feature_file(Mode m, NodeId d) {
    return (m == Mode::Centralized ? "central_" : "router_") + d.str() + ".csv";
}

// ---------------------------------------------------------------- CSV codecs

inline std::string features_csv(const std::vector<FeatureVector>& vs, const std::vector<Truth>& truths,
                                const FeatureSchema& schema) {
    io::Table t;
    t.header = {"window", "window_start", "device", "truth"};
    t.header.insert(t.header.end(), schema.names.begin(), schema.names.end());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        std::vector<std::string> row{std::to_string(i), format_timestamp(vs[i].window_start), vs[i].device.str(),
                                     to_string(i < truths.size() ? truths[i] : Truth::Normal)};
        for (double x : vs[i].values) row.push_back(io::num(x));
        t.rows.push_back(std::move(row));
    }
    return t.str();
}

struct FeatureTable {
    std::vector<FeatureVector> vectors;
    std::vector<Truth> truths;
};

inline FeatureTable read_features(const fs::path& p) {
    const auto t = io::Table::parse(io::read_file(p));
    if (t.header.size() != 4 + kFeatureCount) throw ScalerMismatch(p.string() + ": expected " +
                                                                   std::to_string(kFeatureCount) + " feature columns");
    FeatureTable out;
    for (const auto& r : t.rows) {
        FeatureVector v;
        auto ts = parse_timestamp(r[1]);
        if (!ts) throw ConfigError(p.string() + ": bad window_start '" + r[1] + "'");
        v.window_start = *ts;
        v.device = parse_node(r[2]);
        for (std::size_t i = 0; i < kFeatureCount; ++i) v.values[i] = io::parse_double(r[4 + i]);
        out.vectors.push_back(std::move(v));
        out.truths.push_back(r[3] == "Attack" ? Truth::Attack : Truth::Normal);
    }
    return out;
}

inline std::string scaler_csv(const ScalerParams& p, const FeatureSchema& schema) {
    io::Table t;
    t.header = {"slot", "name", "min", "max", "policy"};
    for (std::size_t i = 0; i < p.dims(); ++i)
        t.rows.push_back({std::to_string(i), schema.names[i], io::num(p.min[i]), io::num(p.max[i]), to_string(p.policy)});
    return t.str();
}

inline ScalerParams read_scaler(const fs::path& p) {
    const auto t = io::Table::parse(io::read_file(p));
    ScalerParams s;
    for (const auto& r : t.rows) {
        s.min.push_back(io::parse_double(r[2]));
        s.max.push_back(io::parse_double(r[3]));
        s.policy = r[4] == "clamp" ? ScalePolicy::Clamp : ScalePolicy::Extrapolate;
    }
    if (s.dims() != kFeatureCount) throw ScalerMismatch(p.string() + ": wrong scaler dimension");
    return s;
}

inline void write_weights(const fs::path& p, const ModelWeights<float>& w) { io::write_file(p, serialize_weights(w)); }
inline ModelWeights<float> read_weights(const fs::path& p) { return deserialize_weights(io::read_file(p)); }

inline std::string loss_history_csv(const std::vector<double>& h) {
    io::Table t;
    t.header = {"epoch", "loss"};
    for (std::size_t i = 0; i < h.size(); ++i) t.rows.push_back({std::to_string(i + 1), io::num(h[i])});
    return t.str();
}

inline std::string ledger_csv(const std::vector<WeightMessage>& ledger) {
    io::Table t;
    t.header = {"round", "sender", "receiver", "bytes", "path"};
    for (const auto& m : ledger)
        t.rows.push_back({std::to_string(m.round), m.sender.str(), m.receiver.str(), std::to_string(m.bytes), m.path});
    return t.str();
}

inline std::vector<WeightMessage> read_ledger(const fs::path& p) {
    const auto t = io::Table::parse(io::read_file(p));
    std::vector<WeightMessage> out;
    for (const auto& r : t.rows)
        out.push_back({std::stoi(r[0]), parse_node(r[1]), parse_node(r[2]), std::stoull(r[3]), r[4]});
    return out;
}

struct ThresholdRow {
    Mode mode;
    Threshold threshold;
};

inline std::string thresholds_csv(const std::vector<ThresholdRow>& rows) {
    io::Table t;
    t.header = {"mode", "device", "k", "mean", "std", "threshold"};
    for (const auto& [m, th] : rows)
        t.rows.push_back({to_string(m), th.device.str(), io::num(th.k), io::num(th.mean), io::num(th.std), io::num(th.value)});
    return t.str();
}

inline std::vector<ThresholdRow> read_thresholds(const fs::path& p) {
    const auto t = io::Table::parse(io::read_file(p));
    std::vector<ThresholdRow> out;
    for (const auto& r : t.rows) {
        Threshold th;
        th.device = parse_node(r[1]);
        th.k = io::parse_double(r[2]);
        th.mean = io::parse_double(r[3]);
        th.std = io::parse_double(r[4]);
        th.value = io::parse_double(r[5]);
        out.push_back({r[0] == "central" ? Mode::Centralized : Mode::Federated, th});
    }
    return out;
}

inline const Threshold& find_threshold(const std::vector<ThresholdRow>& rows, Mode m, NodeId d, double k) {
    for (const auto& r : rows)
        if (r.mode == m && r.threshold.device == d && r.threshold.k == k) return r.threshold;
    throw ConfigError("no threshold for " + to_string(m) + " " + d.str() + " k=" + io::num(k));
}

// ------------------------------------------------------------------- helpers

/// Runs fn(0..n-1) on up to `workers` threads. The first exception wins.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        }));
    for (auto& f : pool) f.get();
}

template <class F>
auto run_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

/// Window indices of the normal corpus: the pre-training hour, then per FL
/// round a chronological train/validation split of that round's chunk.
struct DataSplit {
    std::vector<std::size_t> pretrain;
    std::vector<std::vector<std::size_t>> train_by_round;
    std::vector<std::size_t> validation;

    std::vector<std::size_t> train() const {
        std::vector<std::size_t> out;
        for (const auto& r : train_by_round) out.insert(out.end(), r.begin(), r.end());
        return out;
    }
};

inline DataSplit make_split(const ExperimentConfig& c) {
    DataSplit s;
    const auto pre = static_cast<std::size_t>(c.pretrain_duration / c.window_len);
    const auto per_round = static_cast<std::size_t>(c.fl.round_interval / c.window_len);
    const auto n_val = static_cast<std::size_t>(std::llround(c.validation_fraction * static_cast<double>(per_round)));
    for (std::size_t i = 0; i < pre; ++i) s.pretrain.push_back(i);
    for (int r = 0; r < c.fl.rounds; ++r) {
        const auto base = pre + static_cast<std::size_t>(r) * per_round;
        std::vector<std::size_t> tr;
        for (std::size_t i = 0; i < per_round; ++i) (i + n_val < per_round ? tr : s.validation).push_back(base + i);
        s.train_by_round.push_back(std::move(tr));
    }
    return s;
}

inline std::size_t normal_window_count(const ExperimentConfig& c) {
    return static_cast<std::size_t>((c.pretrain_duration + c.normal_duration) / c.window_len);
}

inline Sample to_sample(const FeatureVector& v) { return Sample(v.values.begin(), v.values.end()); }

inline Dataset scaled(const FeatureTable& t, const std::vector<std::size_t>& idx, const ScalerParams& p) {
    Dataset out;
    for (auto i : idx) {
        if (i >= t.vectors.size()) throw EmptyDataset("feature table shorter than the corpus split");
        out.push_back(to_sample(apply_scaler(t.vectors[i], p)));
    }
    return out;
}

inline std::vector<double> window_losses(const ModelWeights<float>& w, const Dataset& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(static_cast<double>(sample_loss<float>(w, x)));
    return out;
}

inline std::vector<std::size_t> iota_n(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

/// Router-level and coordinator-level feature files of one simulated run.
inline void extract_run_features(const ExperimentConfig& c, const fs::path& logs, const fs::path& out,
                                 Timestamp start, std::size_t windows, const std::vector<Truth>& truths) {
    const auto coord = parse_log(io::read_file(logs / "C.log"));
    const auto router_schema = FeatureSchema::router(), coord_schema = FeatureSchema::coordinator();
    for (auto r : canonical_roster(c.fl.client_roster)) {
        const auto own = parse_log(io::read_file(logs / (r.str() + ".log")));
        const auto view = router_view(own, r);
        io::write_file(out / feature_file(Mode::Federated, r),
                       features_csv(extract_series(view, r, router_schema, start, c.window_len, windows), truths,
                                    router_schema));
        const auto slice = coordinator_slice(coord, r);
        io::write_file(out / feature_file(Mode::Centralized, r),
                       features_csv(extract_series(slice, r, coord_schema, start, c.window_len, windows), truths,
                                    coord_schema));
    }
    if (c.evaluate_coordinator)
        io::write_file(out / feature_file(Mode::Centralized, NodeId::coordinator()),
                       features_csv(extract_series(coord, NodeId::coordinator(), coord_schema, start, c.window_len,
                                                   windows),
                                    truths, coord_schema));
}

inline void write_logs(const fs::path& dir, const LogDocuments& logs) {
    fs::create_directories(dir);
    for (const auto& [dev, text] : logs) io::write_file(dir / (dev.str() + ".log"), text);
}

inline std::string scaler_file(Mode m, NodeId d) {
    return m == Mode::Centralized ? "scaler_central.csv" : "scaler_fed_" + d.str() + ".csv";
}

inline std::string model_file(Mode m) { return m == Mode::Centralized ? "central.wts" : "global.wts"; }

// ------------------------------------------------------------------ stages

inline void stage_simulate(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    const auto topo = build_topology(f);
    auto sim = c.sim;
    sim.seed = derive_seed(c.seed, "normal/" + to_string(f));
    sim.duration = c.pretrain_duration + c.normal_duration;
    write_logs(L.normal_logs(), run_simulation(topo, sim).logs);

    const auto specs = selected_attacks(c, f);
    parallel_for(specs.size(), c.workers, [&](std::size_t i) {
        const auto plan = plan_for(c, specs[i]);
        auto s = c.sim;
        s.seed = derive_seed(c.seed, "attack/" + to_string(f) + "/" + specs[i].slug());
        s.duration = plan.total();
        const auto dir = L.attack(specs[i]);
        io::write_file(dir / "plan.txt", serialize_plan(plan));
        write_logs(dir / "logs", run_simulation(topo, s, plan).logs);
    });
}

inline void stage_features(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    const auto n = normal_window_count(c);
    extract_run_features(c, L.normal_logs(), L.normal_features(), c.sim.start_time, n,
                         std::vector<Truth>(n, Truth::Normal));
    const auto specs = selected_attacks(c, f);
    parallel_for(specs.size(), c.workers, [&](std::size_t i) {
        const auto dir = L.attack(specs[i]);
        const auto plan = parse_plan(io::read_file(dir / "plan.txt"));
        std::vector<Truth> truths;
        for (const auto& w : label_windows(plan, c.window_len)) truths.push_back(w.truth);
        extract_run_features(c, dir / "logs", dir / "features", c.sim.start_time, truths.size(), truths);
    });
}

/// Per-router scalers for the federated pipeline, one pooled scaler for the
/// centralized one; all fitted on training windows only.
inline void stage_fit_scalers(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    const auto train = make_split(c).train();
    std::vector<FeatureVector> pooled;
    for (auto r : canonical_roster(c.fl.client_roster)) {
        const auto fed = read_features(L.normal_features() / feature_file(Mode::Federated, r));
        std::vector<FeatureVector> own;
        for (auto i : train) own.push_back(fed.vectors.at(i));
        io::write_file(L.models() / scaler_file(Mode::Federated, r),
                       scaler_csv(fit_scaler(own, c.scale_policy), FeatureSchema::router()));
        const auto cen = read_features(L.normal_features() / feature_file(Mode::Centralized, r));
        for (auto i : train) pooled.push_back(cen.vectors.at(i));
    }
    io::write_file(L.models() / scaler_file(Mode::Centralized, {}),
                   scaler_csv(fit_scaler(pooled, c.scale_policy), FeatureSchema::coordinator()));
}

inline Dataset load_scaled(const fs::path& features_dir, const fs::path& models, Mode m,
                           NodeId d, const std::vector<std::size_t>& idx) {
    const auto table = read_features(features_dir / feature_file(m, d));
    return scaled(table, idx, read_scaler(models / scaler_file(m, d)));
}

inline void stage_pretrain(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    if (!fs::exists(L.models() / scaler_file(Mode::Centralized, {}))) stage_fit_scalers(c, f);
    const auto split = make_split(c);
    Dataset data;
    for (auto r : canonical_roster(c.fl.client_roster)) {
        auto d = load_scaled(L.normal_features(), L.models(), Mode::Federated, r, split.pretrain);
        data.insert(data.end(), d.begin(), d.end());
    }
    auto cfg = c.pretrain_train;
    cfg.seed = derive_seed(c.seed, "pretrain/shuffle");
    const auto init = ModelWeights<float>::glorot(c.arch, derive_seed(c.seed, "pretrain/init"));
    const auto res = train<float>(init, data, cfg);
    write_weights(L.models() / "pretrained.wts", res.weights);
    io::write_file(L.models() / "pretrain_loss.csv", loss_history_csv(res.loss_history));
}

inline void stage_train_central(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    if (!fs::exists(L.models() / scaler_file(Mode::Centralized, {}))) stage_fit_scalers(c, f);
    const auto train_idx = make_split(c).train();
    Dataset data;
    for (auto r : canonical_roster(c.fl.client_roster)) {
        auto d = load_scaled(L.normal_features(), L.models(), Mode::Centralized, r, train_idx);
        data.insert(data.end(), d.begin(), d.end());
    }
    auto cfg = c.central_train;
    cfg.seed = derive_seed(c.seed, "central/shuffle");
    const auto init = ModelWeights<float>::glorot(c.arch, derive_seed(c.seed, "central/init"));
    const auto res = train<float>(init, data, cfg);
    write_weights(L.models() / model_file(Mode::Centralized), res.weights);
    io::write_file(L.models() / "central_loss.csv", loss_history_csv(res.loss_history));
}

inline FLResult stage_train_fed(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    if (!fs::exists(L.models() / "pretrained.wts")) stage_pretrain(c, f);
    const auto split = make_split(c);
    std::map<NodeId, ClientStream> streams;
    for (auto r : canonical_roster(c.fl.client_roster))
        for (const auto& idx : split.train_by_round)
            streams[r].push_back(load_scaled(L.normal_features(), L.models(), Mode::Federated, r, idx));
    auto fl = c.fl;
    fl.local_train.seed = derive_seed(c.seed, "fed/shuffle");
    auto res = run_federated_training(fl, build_topology(f), read_weights(L.models() / "pretrained.wts"), streams);
    for (std::size_t i = 0; i < res.round_globals.size(); ++i)
        write_weights(L.models() / ("global_r" + std::to_string(i + 1) + ".wts"), res.round_globals[i]);
    write_weights(L.models() / model_file(Mode::Federated), res.global);
    io::write_file(L.models() / "comms_ledger.csv", ledger_csv(res.ledger));
    io::Table t;
    t.header = {"client", "round", "epoch", "loss"};
    for (const auto& [r, rounds] : res.loss_history)
        for (std::size_t k = 0; k < rounds.size(); ++k)
            for (std::size_t e = 0; e < rounds[k].size(); ++e)
                t.rows.push_back({r.str(), std::to_string(k + 1), std::to_string(e + 1), io::num(rounds[k][e])});
    io::write_file(L.models() / "fed_loss.csv", t.str());
    return res;
}

inline void stage_thresholds(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    const auto split = make_split(c);
    std::vector<ThresholdRow> rows;
    io::Table vl;
    vl.header = {"mode", "device", "window", "loss"};
    for (auto m : c.modes) {
        const auto model = read_weights(L.models() / model_file(m));
        for (auto d : devices(c, m)) {
            const auto losses = window_losses(model, load_scaled(L.normal_features(), L.models(), m, d, split.validation));
            for (std::size_t i = 0; i < losses.size(); ++i)
                vl.rows.push_back({to_string(m), d.str(), std::to_string(split.validation[i]), io::num(losses[i])});
            for (double k : c.ks) rows.push_back({m, calibrate_threshold(losses, k, d)});
        }
    }
    io::write_file(L.thresholds(), thresholds_csv(rows));
    io::write_file(L.root / "validation_losses.csv", vl.str());
}

inline std::string loss_column(Mode m, NodeId d) { return to_string(m) + "_" + d.str(); }

/// Reconstruction loss of every window of every attack run, plus verdicts at
/// each configured k.
inline void stage_detect(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    const auto thresholds = read_thresholds(L.thresholds());
    std::map<Mode, ModelWeights<float>> models;
    for (auto m : c.modes) models.emplace(m, read_weights(L.models() / model_file(m)));
    const auto specs = selected_attacks(c, f);
    parallel_for(specs.size(), c.workers, [&](std::size_t ai) {
        const auto dir = L.attack(specs[ai]);
        io::Table losses, verdicts;
        losses.header = {"window", "window_start", "truth"};
        verdicts.header = {"mode", "device", "k", "window", "loss", "threshold", "verdict", "truth"};
        std::vector<std::vector<double>> cols;
        std::vector<Truth> truths;
        std::vector<Timestamp> starts;
        for (auto m : c.modes)
            for (auto d : devices(c, m)) {
                const auto table = read_features(dir / "features" / feature_file(m, d));
                truths = table.truths;
                starts.clear();
                for (const auto& v : table.vectors) starts.push_back(v.window_start);
                const auto ls = window_losses(models.at(m), load_scaled(dir / "features", L.models(), m, d,
                                                                        iota_n(table.vectors.size())));
                losses.header.push_back(loss_column(m, d));
                cols.push_back(ls);
                for (double k : c.ks) {
                    const auto& th = find_threshold(thresholds, m, d, k);
                    for (std::size_t w = 0; w < ls.size(); ++w)
                        verdicts.rows.push_back({to_string(m), d.str(), io::num(k), std::to_string(w), io::num(ls[w]),
                                                 io::num(th.value), to_string(classify_window(ls[w], th)),
                                                 to_string(truths[w])});
                }
            }
        for (std::size_t w = 0; w < truths.size(); ++w) {
            std::vector<std::string> row{std::to_string(w), format_timestamp(starts[w]), to_string(truths[w])};
            for (const auto& col : cols) row.push_back(io::num(col[w]));
            losses.rows.push_back(std::move(row));
        }
        io::write_file(dir / "losses.csv", losses.str());
        io::write_file(dir / "verdicts.csv", verdicts.str());
    });
}

/// Network-level verdict: a window is anomalous if any router flags it.
inline constexpr const char* kNetworkLabel = "NET";

struct ReportRow {
    std::string attack; // slug, or "ALL" when pooled
    Mode mode;
    std::string device; // router name or NET
    double k;
    Confusion confusion;
    Metrics metrics;
};

struct AttackOutcome {
    AttackSpec spec;
    Mode mode;
    double k;
    Confusion confusion;
    Metrics metrics;
};

struct FamilyResult {
    ScenarioFamily family;
    std::vector<ReportRow> per_attack;
    std::vector<ReportRow> pooled;
    std::vector<AttackOutcome> outcomes; // network-level at each attack's best k
    std::map<std::pair<Mode, std::string>, double> optimal_k;
};

inline std::vector<std::string> report_cells(const ReportRow& r) {
    const auto& m = r.metrics;
    const auto& c = r.confusion;
    return {r.attack, to_string(r.mode), r.device, io::num(r.k), std::to_string(c.tp), std::to_string(c.fp),
            std::to_string(c.tn), std::to_string(c.fn), io::fixed6(m.accuracy), io::fixed6(m.precision),
            io::fixed6(m.recall), io::fixed6(m.f1), io::fixed6(m.false_positive_rate)};
}

inline const std::vector<std::string>& report_header() {
    static const std::vector<std::string> h{"attack", "mode", "device", "k", "tp", "fp", "tn", "fn",
                                            "accuracy", "precision", "recall", "f1", "fpr"};
    return h;
}

/// Loss curves of one device over one run, one series per mode.
struct PlotSeries {
    Micros window_len = std::chrono::minutes{1};
    std::vector<Truth> truths;
    std::vector<std::pair<Mode, std::vector<double>>> losses;
    std::vector<std::pair<Mode, std::vector<Threshold>>> thresholds;
};

/// Time-indexed CSV: truth, a loss column per mode and a threshold line per
/// mode and k.
inline std::string emit_plot_data(const PlotSeries& s) {
    io::Table t;
    t.header = {"window", "minute", "truth"};
    for (const auto& [m, ls] : s.losses) {
        if (ls.size() != s.truths.size()) throw ShapeMismatch("loss series and truths are not aligned");
        t.header.push_back(to_string(m) + "_loss");
    }
    for (const auto& [m, ths] : s.thresholds)
        for (const auto& th : ths) t.header.push_back(to_string(m) + "_threshold_k" + io::num(th.k));
    const auto minutes = std::chrono::duration<double, std::ratio<60>>(s.window_len).count();
    for (std::size_t w = 0; w < s.truths.size(); ++w) {
        std::vector<std::string> row{std::to_string(w), io::num(static_cast<double>(w) * minutes), to_string(s.truths[w])};
        for (const auto& [m, ls] : s.losses) row.push_back(io::num(ls[w]));
        for (const auto& [m, ths] : s.thresholds)
            for (const auto& th : ths) row.push_back(io::num(th.value));
        t.rows.push_back(std::move(row));
    }
    return t.str();
}

inline std::string plot_csv(const io::Table& losses, const std::vector<ThresholdRow>& thresholds,
                            const ExperimentConfig& c, NodeId router) {
    PlotSeries s;
    s.window_len = c.window_len;
    for (const auto& r : losses.rows) s.truths.push_back(r[2] == "Attack" ? Truth::Attack : Truth::Normal);
    for (auto m : c.modes) {
        const auto col = losses.column(loss_column(m, router));
        std::vector<double> ls;
        for (const auto& r : losses.rows) ls.push_back(io::parse_double(r[col]));
        s.losses.emplace_back(m, std::move(ls));
        std::vector<Threshold> ths;
        for (double k : c.ks) ths.push_back(find_threshold(thresholds, m, router, k));
        s.thresholds.emplace_back(m, std::move(ths));
    }
    return emit_plot_data(s);
}

/// Scores every attack at every k per router and network-wide, pools the
/// counts across the family and picks the best k.
inline FamilyResult stage_sweep_k(const ExperimentConfig& c, ScenarioFamily f) {
    const auto L = layout(c, f);
    const auto thresholds = read_thresholds(L.thresholds());
    const auto specs = selected_attacks(c, f);
    const auto routers = canonical_roster(c.fl.client_roster);
    FamilyResult res;
    res.family = f;
    std::vector<std::vector<ReportRow>> per(specs.size());
    parallel_for(specs.size(), c.workers, [&](std::size_t ai) {
        const auto dir = L.attack(specs[ai]);
        const auto losses = io::Table::parse(io::read_file(dir / "losses.csv"));
        std::vector<Truth> truths;
        for (const auto& r : losses.rows) truths.push_back(r[2] == "Attack" ? Truth::Attack : Truth::Normal);
        io::Table rep;
        rep.header = report_header();
        for (auto m : c.modes)
            for (double k : c.ks) {
                std::vector<Verdict> net(truths.size(), Verdict::Normal);
                for (auto d : devices(c, m)) {
                    std::vector<double> ls;
                    const auto col = losses.column(loss_column(m, d));
                    for (const auto& r : losses.rows) ls.push_back(io::parse_double(r[col]));
                    const auto rep_d = evaluate(ls, truths, find_threshold(thresholds, m, d, k));
                    per[ai].push_back({specs[ai].slug(), m, d.str(), k, rep_d.confusion, rep_d.metrics});
                    if (!d.is_router()) continue;
                    for (std::size_t w = 0; w < ls.size(); ++w)
                        if (rep_d.windows[w].verdict == Verdict::Anomaly) net[w] = Verdict::Anomaly;
                }
                const auto rn = score(net, truths);
                per[ai].push_back({specs[ai].slug(), m, kNetworkLabel, k, rn.confusion, rn.metrics});
            }
        for (const auto& r : per[ai]) rep.rows.push_back(report_cells(r));
        io::write_file(dir / "reports.csv", rep.str());
        for (auto r : routers) io::write_file(dir / ("plot_" + r.str() + ".csv"), plot_csv(losses, thresholds, c, r));
    });

    std::map<std::tuple<Mode, std::string, double>, Confusion> pooled;
    for (std::size_t ai = 0; ai < specs.size(); ++ai)
        for (const auto& r : per[ai]) {
            res.per_attack.push_back(r);
            auto& p = pooled[{r.mode, r.device, r.k}];
            p.tp += r.confusion.tp;
            p.fp += r.confusion.fp;
            p.tn += r.confusion.tn;
            p.fn += r.confusion.fn;
        }
    std::map<std::pair<Mode, std::string>, std::map<double, double>> f1s;
    for (const auto& [key, conf] : pooled) {
        const auto& [m, d, k] = key;
        const auto met = metrics_from(conf);
        res.pooled.push_back({"ALL", m, d, k, conf, met});
        f1s[{m, d}][k] = met.f1;
    }
    for (const auto& [key, byk] : f1s) res.optimal_k[key] = select_optimal_k(byk);

    // Per attack, the network-level result at the k that suits it best.
    for (std::size_t ai = 0; ai < specs.size(); ++ai)
        for (auto m : c.modes) {
            std::map<double, double> byk;
            for (const auto& r : per[ai])
                if (r.mode == m && r.device == kNetworkLabel) byk[r.k] = r.metrics.f1;
            const double k = select_optimal_k(byk);
            for (const auto& r : per[ai])
                if (r.mode == m && r.device == kNetworkLabel && r.k == k)
                    res.outcomes.push_back({specs[ai], m, k, r.confusion, r.metrics});
        }

    io::Table sum;
    sum.header = report_header();
    for (const auto& r : res.pooled) sum.rows.push_back(report_cells(r));
    io::write_file(L.root / "summary.csv", sum.str());
    io::Table opt;
    opt.header = {"mode", "device", "k", "f1"};
    for (const auto& [key, k] : res.optimal_k) opt.rows.push_back({to_string(key.first), key.second, io::num(k),
                                                                    io::fixed6(f1s[key][k])});
    io::write_file(L.root / "optimal_k.csv", opt.str());
    io::Table det;
    det.header = {"attack", "mode", "k", "recall", "fpr", "f1", "accuracy"};
    for (const auto& o : res.outcomes)
        det.rows.push_back({o.spec.slug(), to_string(o.mode), io::num(o.k), io::fixed6(o.metrics.recall),
                            io::fixed6(o.metrics.false_positive_rate), io::fixed6(o.metrics.f1),
                            io::fixed6(o.metrics.accuracy)});
    io::write_file(L.root / "detection.csv", det.str());
    return res;
}

/// Reference overhead plus, for every family that has a trained federation,
/// the measured one: router log volume of the normal corpus vs the ledger.
inline std::vector<std::pair<std::string, OverheadReport>> stage_overhead(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, OverheadModel>> models{{"reference", OverheadModel::reference()}};
    for (auto f : c.families) {
        const auto L = layout(c, f);
        if (!fs::exists(L.models() / "comms_ledger.csv")) continue;
        OverheadModel m;
        for (auto r : canonical_roster(c.fl.client_roster))
            m.centralized_bytes.push_back(fs::file_size(L.normal_logs() / (r.str() + ".log")));
        m.payload_bytes = fs::file_size(L.models() / model_file(Mode::Federated));
        m.rounds = c.fl.rounds;
        const auto measured = ledger_bytes(read_ledger(L.models() / "comms_ledger.csv"));
        if (measured != overhead_report(m).federated_total)
            throw ShapeMismatch("communication ledger disagrees with the overhead model");
        models.emplace_back("scenario_" + to_string(f), std::move(m));
    }
    io::Table t;
    t.header = {"source", "routers", "rounds", "payload_bytes", "centralized_bytes", "federated_bytes", "ratio",
                "reduction"};
    std::vector<std::pair<std::string, OverheadReport>> out;
    for (const auto& [name, m] : models) {
        const auto r = overhead_report(m);
        t.rows.push_back({name, std::to_string(m.centralized_bytes.size()), std::to_string(m.rounds),
                          std::to_string(m.payload_bytes), std::to_string(r.centralized_total),
                          std::to_string(r.federated_total), io::fixed6(r.ratio), io::fixed6(r.reduction)});
        out.emplace_back(name, r);
    }
    io::write_file(c.out / "overhead.csv", t.str());
    return out;
}

/// FNV-1a 64 of every file under `root` except MANIFEST, sorted by path.
inline std::string bundle_digest(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "MANIFEST") files.push_back(fs::relative(e.path(), root));
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& p : files) {
        const auto data = io::read_file(root / p);
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char ch : data) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        out += fmt::format("{:016x} {:>10} {}\n", h, data.size(), p.generic_string());
    }
    return out;
}

inline constexpr int kBundleVersion = 1;

inline void write_manifest(const ExperimentConfig& c) {
    io::write_file(c.out / "MANIFEST", "bundle_version = " + std::to_string(kBundleVersion) + "\n" + describe(c) +
                                           "\n" + bundle_digest(c.out));
}

struct ExperimentResult {
    std::vector<FamilyResult> families;
    std::vector<std::pair<std::string, OverheadReport>> overhead;
};

/// Every stage for every selected family, then the overhead table and the
/// manifest. Output depends only on the configuration.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    run_stage("config", [&] { c.validate(); });
    ExperimentResult res;
    for (auto f : c.families) {
        run_stage("simulate", [&] { stage_simulate(c, f); });
        run_stage("features", [&] { stage_features(c, f); });
        run_stage("pretrain", [&] {
            stage_fit_scalers(c, f);
            stage_pretrain(c, f);
        });
        run_stage("train-central", [&] { stage_train_central(c, f); });
        run_stage("train-fed", [&] { stage_train_fed(c, f); });
        run_stage("thresholds", [&] { stage_thresholds(c, f); });
        run_stage("detect", [&] { stage_detect(c, f); });
        res.families.push_back(run_stage("sweep-k", [&] { return stage_sweep_k(c, f); }));
    }
    res.overhead = run_stage("overhead", [&] { return stage_overhead(c); });
    run_stage("manifest", [&] { write_manifest(c); });
    return res;
}

} // namespace fedids

#endif // FEDIDS_HARNESS_HPP
