#ifndef FEDIDS_DETECT_HPP
#define FEDIDS_DETECT_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedids/attacks.hpp"
#include "fedids/error.hpp"
#include "fedids/netmodel.hpp"

namespace fedids {

/// mean + k * std over the validation reconstruction losses of one device.
struct Threshold {
    NodeId device;
    double mean = 0;
    double std = 0; // population
    double k = 0;
    double value = 0;
};

inline Threshold calibrate_threshold(std::span<const double> validation_losses, double k, NodeId device = {}) {
    if (validation_losses.empty()) throw EmptyValidation("no validation losses for " + device.str());
    const double n = static_cast<double>(validation_losses.size());
    Threshold t;
    t.device = device;
    t.k = k;
    t.mean = std::accumulate(validation_losses.begin(), validation_losses.end(), 0.0) / n;
    double ss = 0;
    for (double x : validation_losses) ss += (x - t.mean) * (x - t.mean);
    t.std = std::sqrt(ss / n);
    t.value = t.mean + k * t.std;
    return t;
}

enum class Verdict { Normal, Anomaly };

inline std::string to_string(Verdict v) { return v == Verdict::Anomaly ? "Anomaly" : "Normal"; }

inline Verdict classify_window(double loss, const Threshold& t) {
    return loss > t.value ? Verdict::Anomaly : Verdict::Normal;
}

struct Confusion {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const { return tp + tn + fp + fn; }
    bool operator==(const Confusion&) const = default;
};

struct Metrics {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    double false_positive_rate = 0;
    bool precision_undefined = false; // no positive verdicts
    bool recall_undefined = false;    // no positive truths
};

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1_score(double precision, double recall) {
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

inline Metrics metrics_from(const Confusion& c) {
    Metrics m;
    auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.false_positive_rate = ratio(c.fp, c.fp + c.tn);
    m.precision_undefined = c.tp + c.fp == 0;
    m.recall_undefined = c.tp + c.fn == 0;
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

struct WindowVerdict {
    std::size_t window = 0;
    NodeId device;
    double loss = 0;
    Verdict verdict = Verdict::Normal;
    Truth truth = Truth::Normal;
};

struct DetectionReport {
    NodeId device;
    double k = 0;
    std::vector<WindowVerdict> windows;
    Confusion confusion;
    Metrics metrics;
};

/// Confusion counts and metrics of aligned verdict/truth sequences.
inline DetectionReport score(std::span<const WindowVerdict> verdicts) {
    DetectionReport r;
    r.windows.assign(verdicts.begin(), verdicts.end());
    if (!verdicts.empty()) r.device = verdicts.front().device;
    for (const auto& v : verdicts) {
        const bool pos = v.verdict == Verdict::Anomaly, att = v.truth == Truth::Attack;
        if (pos && att) ++r.confusion.tp;
        else if (!pos && !att) ++r.confusion.tn;
        else if (pos) ++r.confusion.fp;
        else ++r.confusion.fn;
    }
    r.metrics = metrics_from(r.confusion);
    return r;
}

inline DetectionReport score(std::span<const Verdict> verdicts, std::span<const Truth> truths, NodeId device = {}) {
    if (verdicts.size() != truths.size()) throw ShapeMismatch("verdicts and truths are not aligned");
    std::vector<WindowVerdict> w;
    for (std::size_t i = 0; i < verdicts.size(); ++i) w.push_back({i, device, 0.0, verdicts[i], truths[i]});
    return score(w);
}

/// Verdicts of a loss series against one threshold.
inline DetectionReport evaluate(std::span<const double> losses, std::span<const Truth> truths, const Threshold& t) {
    if (losses.size() != truths.size()) throw ShapeMismatch("losses and truths are not aligned");
    std::vector<WindowVerdict> w;
    for (std::size_t i = 0; i < losses.size(); ++i)
        w.push_back({i, t.device, losses[i], classify_window(losses[i], t), truths[i]});
    auto r = score(w);
    r.device = t.device;
    r.k = t.k;
    return r;
}

inline const std::vector<double>& default_ks() {
    static const std::vector<double> ks{1, 2, 3, 4};
    return ks;
}

/// One report per k with thresholds calibrated on `validation_losses`.
inline std::map<double, DetectionReport> sweep_k(std::span<const double> validation_losses, std::span<const double> losses,
                                                 std::span<const Truth> truths, std::span<const double> ks,
                                                 NodeId device = {}) {
    if (ks.empty()) throw ConfigError("k sweep needs at least one k");
    std::map<double, DetectionReport> out;
    for (double k : ks) out[k] = evaluate(losses, truths, calibrate_threshold(validation_losses, k, device));
    return out;
}

/// k with the highest F1; ties go to the larger k.
inline double select_optimal_k(const std::map<double, DetectionReport>& reports) {
    if (reports.empty()) throw ConfigError("no reports to select from");
    double best_k = reports.begin()->first;
    double best_f1 = -1;
    for (const auto& [k, r] : reports) {
        if (r.metrics.f1 >= best_f1) {
            best_f1 = r.metrics.f1;
            best_k = k;
        }
    }
    return best_k;
}

inline double select_optimal_k(const std::map<double, double>& f1_by_k) {
    if (f1_by_k.empty()) throw ConfigError("no reports to select from");
    double best_k = f1_by_k.begin()->first, best_f1 = -1;
    for (const auto& [k, f1] : f1_by_k)
        if (f1 >= best_f1) {
            best_f1 = f1;
            best_k = k;
        }
    return best_k;
}

} // namespace fedids

#endif // FEDIDS_DETECT_HPP
