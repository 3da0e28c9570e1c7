// Command-line front end: one subcommand per pipeline stage plus run-all.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedids/harness.hpp"

using namespace fedids;
using std::chrono::duration;
using std::chrono::duration_cast;

namespace {

Micros minutes_to_us(double m) { return duration_cast<Micros>(duration<double, std::ratio<60>>(m)); }
Micros seconds_to_us(double s) { return duration_cast<Micros>(duration<double>(s)); }

struct Options {
    std::string scenario = "III";
    std::vector<std::string> attacks;
    std::uint64_t seed = 2024;
    std::string out = "fedids-out";
    double window_s = 60, send_period_s = 1;
    double pretrain_min = 60, normal_min = 300, round_min = 60;
    double before_min = 20, attack_min = 5, after_min = 10;
    int rounds = 5, epochs = 100, local_epochs = 100, pretrain_epochs = 100, batch_size = 32;
    double lr = 0.001, validation_fraction = 0.2;
    double hop_median_ms = 120, hop_sigma = 0.5, forward_median_ms = 30, forward_sigma = 0.3, drop = 0;
    std::vector<double> ks{1, 2, 3, 4};
    std::string mode = "both", scale = "extrapolate", arch = "standard";
    bool coordinator = false;
    std::size_t workers = 0;
};

ExperimentConfig to_config(const Options& o) {
    ExperimentConfig c;
    if (o.scenario == "all")
        c.families = {ScenarioFamily::I, ScenarioFamily::II, ScenarioFamily::III};
    else
        c.families = {parse_family(o.scenario)};
    c.attacks = o.attacks;
    c.seed = o.seed;
    c.out = o.out;
    c.sim.send_period = seconds_to_us(o.send_period_s);
    c.sim.hop_delay = {o.hop_median_ms, o.hop_sigma};
    c.sim.forward_delay = {o.forward_median_ms, o.forward_sigma};
    c.sim.drop_probability = o.drop;
    c.window_len = seconds_to_us(o.window_s);
    c.pretrain_duration = minutes_to_us(o.pretrain_min);
    c.normal_duration = minutes_to_us(o.normal_min);
    c.normal_before = minutes_to_us(o.before_min);
    c.attack_window = minutes_to_us(o.attack_min);
    c.normal_after = minutes_to_us(o.after_min);
    c.validation_fraction = o.validation_fraction;
    c.arch = o.arch == "latent18" ? Architecture::latent18() : Architecture::standard();
    for (auto* t : {&c.pretrain_train, &c.central_train, &c.fl.local_train}) {
        t->batch_size = static_cast<std::size_t>(o.batch_size);
        t->learning_rate = o.lr;
    }
    c.central_train.epochs = o.epochs;
    c.pretrain_train.epochs = o.pretrain_epochs;
    c.fl.local_train.epochs = o.local_epochs;
    c.fl.rounds = o.rounds;
    c.fl.round_interval = minutes_to_us(o.round_min);
    c.ks = o.ks;
    if (o.mode == "central") c.modes = {Mode::Centralized};
    else if (o.mode == "fed") c.modes = {Mode::Federated};
    c.scale_policy = o.scale == "clamp" ? ScalePolicy::Clamp : ScalePolicy::Extrapolate;
    c.evaluate_coordinator = o.coordinator;
    c.workers = o.workers;
    return c;
}

void report(const ExperimentConfig& c, const std::vector<FamilyResult>& fams) {
    for (const auto& f : fams)
        for (const auto& r : f.pooled)
            if (r.device == kNetworkLabel && r.k == f.optimal_k.at({r.mode, r.device}))
                std::printf("scenario %s  %-7s k*=%g  acc %.4f  prec %.4f  rec %.4f  f1 %.4f  fpr %.4f\n",
                            to_string(f.family).c_str(), to_string(r.mode).c_str(), r.k, r.metrics.accuracy,
                            r.metrics.precision, r.metrics.recall, r.metrics.f1, r.metrics.false_positive_rate);
    std::printf("bundle written to %s\n", c.out.string().c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated autoencoder intrusion detection for tree-routed IoT networks"};
    app.set_config("--config", "", "key = value configuration file");
    app.require_subcommand(1);
    app.fallthrough();
    Options o;

    app.add_option("--seed", o.seed, "Master seed");
    app.add_option("--out", o.out, "Output bundle directory");
    app.add_option("--scenario", o.scenario, "I, II, III or all")->check(CLI::IsMember({"I", "II", "III", "all"}));
    app.add_option("--attack", o.attacks, "Attack tokens such as R1>A (default: whole catalogue)");
    app.add_option("--window-s", o.window_s, "Feature window length in seconds");
    app.add_option("--send-period-s", o.send_period_s, "Edge send period in seconds");
    app.add_option("--pretrain-min", o.pretrain_min, "Pre-training corpus length in minutes");
    app.add_option("--normal-min", o.normal_min, "Normal corpus length in minutes");
    app.add_option("--round-min", o.round_min, "Interval between FL rounds in minutes");
    app.add_option("--rounds", o.rounds, "FL rounds");
    app.add_option("--before-min", o.before_min, "Normal traffic before the attack in minutes");
    app.add_option("--attack-min", o.attack_min, "Attack window in minutes");
    app.add_option("--after-min", o.after_min, "Normal traffic after the attack in minutes");
    app.add_option("--epochs", o.epochs, "Centralized training epochs");
    app.add_option("--local-epochs", o.local_epochs, "Local epochs per FL round");
    app.add_option("--pretrain-epochs", o.pretrain_epochs, "Pre-training epochs");
    app.add_option("--batch-size", o.batch_size, "Mini-batch size");
    app.add_option("--lr", o.lr, "Adam learning rate");
    app.add_option("--validation-fraction", o.validation_fraction, "Tail of each round chunk held out");
    app.add_option("--hop-median-ms", o.hop_median_ms, "Median per-hop link delay");
    app.add_option("--hop-sigma", o.hop_sigma, "Lognormal sigma of the link delay");
    app.add_option("--forward-median-ms", o.forward_median_ms, "Median router hold time");
    app.add_option("--forward-sigma", o.forward_sigma, "Lognormal sigma of the hold time");
    app.add_option("--drop", o.drop, "Per-hop drop probability");
    app.add_option("--ks", o.ks, "Threshold multipliers");
    app.add_option("--mode", o.mode, "central, fed or both")->check(CLI::IsMember({"central", "fed", "both"}));
    app.add_option("--scale", o.scale, "clamp or extrapolate")->check(CLI::IsMember({"clamp", "extrapolate"}));
    app.add_option("--arch", o.arch, "standard or latent18")->check(CLI::IsMember({"standard", "latent18"}));
    app.add_flag("--coordinator", o.coordinator, "Also score the centralized model on all coordinator traffic");
    app.add_option("--workers", o.workers, "Worker threads for attack runs (0: all cores)");

    using PerFamily = std::function<void(const ExperimentConfig&, ScenarioFamily)>;
    std::vector<std::pair<std::string, PerFamily>> stages{
        {"simulate", stage_simulate},
        {"features", stage_features},
        {"pretrain", [](const ExperimentConfig& c, ScenarioFamily f) {
             stage_fit_scalers(c, f);
             stage_pretrain(c, f);
         }},
        {"train-central", stage_train_central},
        {"train-fed", [](const ExperimentConfig& c, ScenarioFamily f) { stage_train_fed(c, f); }},
        {"thresholds", stage_thresholds},
        {"detect", stage_detect},
        {"sweep-k", [](const ExperimentConfig& c, ScenarioFamily f) { stage_sweep_k(c, f); }},
    };
    const std::vector<std::string> help{
        "Simulate the normal corpus and every attack run", "Extract feature windows from the logs",
        "Fit scalers and pre-train the seed model", "Train the centralized baseline",
        "Run federated training", "Calibrate thresholds on validation windows",
        "Score attack windows", "Sweep k and write reports"};
    for (std::size_t i = 0; i < stages.size(); ++i) app.add_subcommand(stages[i].first, help[i]);
    app.add_subcommand("overhead", "Write the communication overhead table");
    app.add_subcommand("run-all", "Every stage, the overhead table and the manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto cfg = to_config(o);
        run_stage("config", [&] { cfg.validate(); });
        const auto* sub = app.get_subcommands().front();
        const auto name = sub->get_name();
        if (name == "run-all") {
            const auto res = run_experiment(cfg);
            report(cfg, res.families);
        } else if (name == "overhead") {
            for (const auto& [src, r] : run_stage("overhead", [&] { return stage_overhead(cfg); }))
                std::printf("%-14s centralized %llu B  federated %llu B  ratio %.4f\n", src.c_str(),
                            static_cast<unsigned long long>(r.centralized_total),
                            static_cast<unsigned long long>(r.federated_total), r.ratio);
        } else {
            for (const auto& [stage, fn] : stages)
                if (stage == name)
                    for (auto f : cfg.families) run_stage(stage, [&] { fn(cfg, f); });
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
