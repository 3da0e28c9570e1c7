#ifndef FEDIDS_FEATURES_HPP
#define FEDIDS_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedids/error.hpp"
#include "fedids/logfmt.hpp"
#include "fedids/netmodel.hpp"
#include "fedids/timestamp.hpp"

namespace fedids {

inline constexpr std::size_t kFeatureCount = 31;
inline constexpr std::size_t kEntropyBins = 10;

/// Slot positions in the 31-wide feature vector.
namespace slot {
inline constexpr std::size_t e2e_mean = 0, e2e_std = 1, e2e_min = 2, e2e_max = 3;
inline constexpr std::size_t e2e_q1 = 4, e2e_q2 = 5, e2e_q3 = 6;
inline constexpr std::size_t fh_mean = 7, fh_std = 8, fh_q1 = 9, fh_q2 = 10, fh_q3 = 11;
inline constexpr std::size_t e2e_entropy = 12, fh_entropy = 13;
inline constexpr std::size_t total_count = 14, avg_hops = 15;
inline constexpr std::size_t src_base = 16; // E1..E4, R1..R3
inline constexpr std::size_t dst_base = 23; // R1, R2, R3, C, A
inline constexpr std::size_t hops_base = 28; // 1, 2, 3+ hops
} // namespace slot

enum class FeatureLevel { Coordinator, Router };

inline std::string to_string(FeatureLevel l) { return l == FeatureLevel::Router ? "router" : "coordinator"; }

struct FeatureSchema {
    static constexpr int kVersion = 1;

    FeatureLevel level = FeatureLevel::Coordinator;
    std::array<std::string, kFeatureCount> names;
    /// Slots the level cannot observe; always zero.
    std::array<bool, kFeatureCount> zero_filled{};

    static FeatureSchema make(FeatureLevel level) {
        FeatureSchema s;
        s.level = level;
        s.names = {"e2e_delay_mean", "e2e_delay_std", "e2e_delay_min", "e2e_delay_max",
                   "e2e_delay_q1",   "e2e_delay_q2",  "e2e_delay_q3",  "first_hop_mean",
                   "first_hop_std",  "first_hop_q1",  "first_hop_q2",  "first_hop_q3",
                   "e2e_delay_entropy", "first_hop_entropy", "total_count", "avg_hops",
                   "src_E1", "src_E2", "src_E3", "src_E4", "src_R1", "src_R2", "src_R3",
                   "dst_R1", "dst_R2", "dst_R3", "dst_C",  "dst_A",
                   "hops_1", "hops_2", "hops_3"};
        if (level == FeatureLevel::Router) {
            // A router never learns when the packet reaches C.
            for (std::size_t i = slot::e2e_mean; i <= slot::e2e_q3; ++i) s.zero_filled[i] = true;
            s.zero_filled[slot::e2e_entropy] = true;
        }
        return s;
    }

    static FeatureSchema coordinator() { return make(FeatureLevel::Coordinator); }
    static FeatureSchema router() { return make(FeatureLevel::Router); }
};

struct FeatureVector {
    Timestamp window_start;
    NodeId device;
    std::vector<double> values = std::vector<double>(kFeatureCount, 0.0);
    bool normalized = false;

    bool operator==(const FeatureVector&) const = default;
};

/// Linear-interpolation quantile over sorted data (R type 7).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Entropy in bits of an equal-width histogram spanning [min, max].
inline double shannon_entropy(std::span<const double> samples, std::size_t bins = kEntropyBins) {
    if (bins == 0) throw ConfigError("entropy needs at least one bin");
    if (samples.empty()) return 0.0;
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return 0.0;
    std::vector<std::size_t> counts(bins, 0);
    for (double x : samples) {
        auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    double h = 0.0;
    const double n = static_cast<double>(samples.size());
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

namespace detail {

struct Summary {
    double mean = 0, std = 0, min = 0, max = 0, q1 = 0, q2 = 0, q3 = 0, entropy = 0;
};

// Sorting first makes every statistic independent of input order.
inline Summary summarize(std::vector<double> xs) {
    Summary s;
    if (xs.empty()) return s;
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / n);
    s.min = xs.front();
    s.max = xs.back();
    s.q1 = quantile_sorted(xs, 0.25);
    s.q2 = quantile_sorted(xs, 0.50);
    s.q3 = quantile_sorted(xs, 0.75);
    s.entropy = shannon_entropy(xs);
    return s;
}

inline std::size_t src_slot(NodeId n) {
    if (n.is_edge()) return slot::src_base + (n.index - 1);
    if (n.is_router()) return slot::src_base + NodeId::kEdges + (n.index - 1);
    return kFeatureCount;
}

inline std::size_t dst_slot(NodeId n) {
    if (n.is_router()) return slot::dst_base + (n.index - 1);
    if (n.is_coordinator()) return slot::dst_base + 3;
    if (n.is_attacker()) return slot::dst_base + 4;
    return kFeatureCount;
}

} // namespace detail

/// Raw (unnormalized) features of the entries of one device and one window.
/// Delays are in milliseconds; counts are per hop segment (senders and
/// receivers) and per entry (total, hop classes).
inline FeatureVector extract_window(std::span<const LogEntry> entries, Timestamp window_start, NodeId device,
                                    const FeatureSchema& schema) {
    FeatureVector v;
    v.window_start = window_start;
    v.device = device;
    auto& x = v.values;
    if (entries.empty()) return v;

    std::vector<double> e2e, first_hop;
    double hops_sum = 0;
    for (const auto& e : entries) {
        if (e.kind == EntryKind::Coordinator) e2e.push_back(end_to_end_delay_ms(e));
        if (e.segments.front().received_at) first_hop.push_back(first_hop_delay_ms(e));
        const auto hc = hop_count(e);
        hops_sum += static_cast<double>(hc);
        x[slot::hops_base + std::min<std::size_t>(hc, 3) - 1] += 1;
        for (const auto& s : e.segments) {
            if (auto i = detail::src_slot(s.from); i < kFeatureCount) x[i] += 1;
            if (auto i = detail::dst_slot(s.to); i < kFeatureCount) x[i] += 1;
        }
    }
    const auto d = detail::summarize(std::move(e2e));
    x[slot::e2e_mean] = d.mean;
    x[slot::e2e_std] = d.std;
    x[slot::e2e_min] = d.min;
    x[slot::e2e_max] = d.max;
    x[slot::e2e_q1] = d.q1;
    x[slot::e2e_q2] = d.q2;
    x[slot::e2e_q3] = d.q3;
    x[slot::e2e_entropy] = d.entropy;
    const auto f = detail::summarize(std::move(first_hop));
    x[slot::fh_mean] = f.mean;
    x[slot::fh_std] = f.std;
    x[slot::fh_q1] = f.q1;
    x[slot::fh_q2] = f.q2;
    x[slot::fh_q3] = f.q3;
    x[slot::fh_entropy] = f.entropy;
    x[slot::total_count] = static_cast<double>(entries.size());
    x[slot::avg_hops] = hops_sum / static_cast<double>(entries.size());

    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (schema.zero_filled[i]) x[i] = 0.0;
    return v;
}

/// Entries a router can compute features from: those it logged itself.
inline std::vector<LogEntry> router_view(std::span<const LogEntry> entries, NodeId router) {
    if (!router.is_router()) throw ConfigError(router.str() + " is not a router");
    std::vector<LogEntry> out;
    for (const auto& e : entries)
        if (e.kind == EntryKind::Router && e.segments.back().from == router) out.push_back(e);
    return out;
}

/// Coordinator entries whose path traverses `router`; the coordinator-side
/// replay of one router's traffic.
inline std::vector<LogEntry> coordinator_slice(std::span<const LogEntry> entries, NodeId router) {
    std::vector<LogEntry> out;
    for (const auto& e : entries) {
        if (e.kind != EntryKind::Coordinator) continue;
        bool through = false;
        for (const auto& s : e.segments) through = through || s.to == router;
        if (through) out.push_back(e);
    }
    return out;
}

/// Splits entries into `count` tumbling windows by first send time. Entries
/// outside [start, start + count * len) are dropped.
inline std::vector<std::vector<LogEntry>> bucket_windows(std::span<const LogEntry> entries, Timestamp start,
                                                         Micros len, std::size_t count) {
    std::vector<std::vector<LogEntry>> out(count);
    for (const auto& e : entries) {
        const auto off = e.first_sent() - start;
        if (off < Micros::zero()) continue;
        const auto w = static_cast<std::size_t>(off / len);
        if (w < count) out[w].push_back(e);
    }
    return out;
}

inline std::vector<FeatureVector> extract_series(std::span<const LogEntry> entries, NodeId device,
                                                 const FeatureSchema& schema, Timestamp start, Micros len,
                                                 std::size_t count) {
    auto buckets = bucket_windows(entries, start, len, count);
    std::vector<FeatureVector> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w)
        out.push_back(extract_window(buckets[w], start + len * static_cast<long long>(w), device, schema));
    return out;
}

/// How values outside the fitted range are mapped.
///  Clamp:       (x-min)/(max-min) clipped to [0,1]; zero-range slots map to 0.
///  Extrapolate: (x-min)/(max-min) unclipped; zero-range slots use a unit
///               range, so they map to x-min.
enum class ScalePolicy { Clamp, Extrapolate };

inline std::string to_string(ScalePolicy p) { return p == ScalePolicy::Clamp ? "clamp" : "extrapolate"; }

struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;
    ScalePolicy policy = ScalePolicy::Clamp;

    std::size_t dims() const { return min.size(); }
    bool operator==(const ScalerParams&) const = default;
};

inline ScalerParams fit_scaler(std::span<const FeatureVector> train, ScalePolicy policy = ScalePolicy::Clamp) {
    if (train.empty()) throw EmptyDataset("scaler needs at least one training vector");
    const auto dims = train.front().values.size();
    ScalerParams p;
    p.policy = policy;
    p.min.assign(dims, std::numeric_limits<double>::infinity());
    p.max.assign(dims, -std::numeric_limits<double>::infinity());
    for (const auto& v : train) {
        if (v.normalized) throw ScalerMismatch("scaler must be fitted on raw vectors");
        if (v.values.size() != dims) throw ScalerMismatch("training vectors disagree on dimension");
        for (std::size_t i = 0; i < dims; ++i) {
            p.min[i] = std::min(p.min[i], v.values[i]);
            p.max[i] = std::max(p.max[i], v.values[i]);
        }
    }
    return p;
}

inline double scale_value(double x, double lo, double hi, ScalePolicy policy) {
    const double range = hi - lo;
    if (policy == ScalePolicy::Clamp) {
        if (!(range > 0)) return 0.0;
        return std::clamp((x - lo) / range, 0.0, 1.0);
    }
    return (x - lo) / (range > 0 ? range : 1.0);
}

inline FeatureVector apply_scaler(FeatureVector v, const ScalerParams& p) {
    if (v.normalized) throw ScalerMismatch("vector is already normalized");
    if (v.values.size() != p.dims())
        throw ScalerMismatch("vector has " + std::to_string(v.values.size()) + " slots, scaler " +
                             std::to_string(p.dims()));
    for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] = scale_value(v.values[i], p.min[i], p.max[i], p.policy);
    v.normalized = true;
    return v;
}

} // namespace fedids

#endif // FEDIDS_FEATURES_HPP
