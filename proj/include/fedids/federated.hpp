#ifndef FEDIDS_FEDERATED_HPP
#define FEDIDS_FEDERATED_HPP

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedids/autoencoder.hpp"
#include "fedids/error.hpp"
#include "fedids/netmodel.hpp"
#include "fedids/timestamp.hpp"

namespace fedids {

namespace detail {

template <class Acc>
ModelWeights<Acc> widen(const ModelWeights<float>& w) {
    return w.template cast<Acc>();
}

template <class Acc>
void add_into(ModelWeights<Acc>& sum, const ModelWeights<Acc>& w) {
    for (std::size_t li = 0; li < sum.layers.size(); ++li) {
        auto& s = sum.layers[li];
        const auto& l = w.layers[li];
        for (std::size_t i = 0; i < s.weight.size(); ++i) s.weight[i] += l.weight[i];
        for (std::size_t i = 0; i < s.bias.size(); ++i) s.bias[i] += l.bias[i];
    }
}

template <class Acc>
ModelWeights<float> divide(ModelWeights<Acc> sum, std::size_t count) {
    const Acc k = static_cast<Acc>(count);
    sum.for_each([&](Acc& x) { x /= k; });
    return sum.template cast<float>();
}

inline void check_shapes(std::span<const ModelWeights<float>> ws) {
    if (ws.empty()) throw EmptyRoster("no client updates to aggregate");
    for (const auto& w : ws)
        if (!w.same_shape(ws.front()))
            throw ShapeMismatch("client architecture " + w.tag() + " differs from " + ws.front().tag());
}

} // namespace detail

/// Element-wise mean of the client models, summed in the given order in `Acc`.
template <class Acc = double>
ModelWeights<float> fedavg(std::span<const ModelWeights<float>> updates) {
    detail::check_shapes(updates);
    auto sum = detail::widen<Acc>(updates.front());
    for (std::size_t k = 1; k < updates.size(); ++k) detail::add_into(sum, detail::widen<Acc>(updates[k]));
    return detail::divide(std::move(sum), updates.size());
}

/// A partial aggregate as it travels up the router tree.
template <class Acc = double>
struct WeightUpdate {
    ModelWeights<Acc> sum_weights;
    std::size_t count = 1;
    NodeId origin;
    int round = 0;
};

/// Parent links over client indices; -1 means the coordinator.
struct AggregationTree {
    std::vector<int> parent;

    std::size_t size() const { return parent.size(); }

    std::vector<std::vector<std::size_t>> children() const {
        std::vector<std::vector<std::size_t>> out(parent.size());
        for (std::size_t i = 0; i < parent.size(); ++i)
            if (parent[i] >= 0) out[static_cast<std::size_t>(parent[i])].push_back(i);
        return out;
    }

    bool is_leaf(std::size_t i) const {
        for (auto p : parent)
            if (p == static_cast<int>(i)) return false;
        return true;
    }

    void validate() const {
        for (std::size_t i = 0; i < parent.size(); ++i) {
            std::size_t steps = 0;
            for (int at = static_cast<int>(i); at >= 0; at = parent[static_cast<std::size_t>(at)]) {
                if (at >= static_cast<int>(parent.size())) throw ShapeMismatch("tree parent out of range");
                if (++steps > parent.size()) throw ShapeMismatch("aggregation tree has a cycle");
            }
        }
    }
};

/// Tree aggregation: every client adds its children's partial sums and counts
/// to its own weights and passes the result to its parent; the coordinator
/// divides the sum of the root aggregates by the total count.
template <class Acc = double>
ModelWeights<float> aggregate_tree(const AggregationTree& tree, std::span<const ModelWeights<float>> locals) {
    detail::check_shapes(locals);
    if (tree.size() != locals.size()) throw ShapeMismatch("tree and update count differ");
    tree.validate();
    const auto kids = tree.children();
    std::function<WeightUpdate<Acc>(std::size_t)> collect = [&](std::size_t i) {
        WeightUpdate<Acc> u{detail::widen<Acc>(locals[i]), 1, {}, 0};
        for (auto c : kids[i]) {
            auto child = collect(c);
            detail::add_into(u.sum_weights, child.sum_weights);
            u.count += child.count;
        }
        return u;
    };
    std::optional<WeightUpdate<Acc>> total;
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (tree.parent[i] >= 0) continue;
        auto u = collect(i);
        if (!total) {
            total = std::move(u);
        } else {
            detail::add_into(total->sum_weights, u.sum_weights);
            total->count += u.count;
        }
    }
    return detail::divide(std::move(total->sum_weights), total->count);
}

/// The roster's routers (dense order) and their parents in the normal routing
/// tree. A parent outside the roster is skipped over towards C.
inline AggregationTree router_tree(const Topology& topo, std::span<const NodeId> roster) {
    AggregationTree t;
    for (auto r : roster) {
        NodeId up = parent_of(topo, r);
        int idx = -1;
        for (std::size_t guard = 0; !up.is_coordinator() && guard < kHopLimit; ++guard) {
            auto it = std::find(roster.begin(), roster.end(), up);
            if (it != roster.end()) {
                idx = static_cast<int>(it - roster.begin());
                break;
            }
            if (!up.is_router()) break;
            up = parent_of(topo, up);
        }
        t.parent.push_back(idx);
    }
    return t;
}

inline std::vector<NodeId> canonical_roster(std::vector<NodeId> roster) {
    std::sort(roster.begin(), roster.end());
    roster.erase(std::unique(roster.begin(), roster.end()), roster.end());
    return roster;
}

/// One aggregation round over the routers in `locals`.
template <class Acc = double>
ModelWeights<float> hierarchical_round(const Topology& topo, const std::map<NodeId, ModelWeights<float>>& locals,
                                       std::span<const NodeId> roster) {
    if (roster.empty()) throw EmptyRoster("federated roster is empty");
    const auto order = canonical_roster({roster.begin(), roster.end()});
    std::vector<ModelWeights<float>> ws;
    for (auto r : order) {
        auto it = locals.find(r);
        if (it == locals.end()) throw MissingUpdate("router " + r.str() + " did not report weights");
        ws.push_back(it->second);
    }
    return aggregate_tree<Acc>(router_tree(topo, order), ws);
}

/// Clients start from a copy of the pre-trained model.
inline ModelWeights<float> transfer_init(const ModelWeights<float>& pretrained, const Architecture& client_arch) {
    if (pretrained.architecture() != client_arch)
        throw ShapeMismatch("pre-trained model " + pretrained.tag() + " does not fit client " + client_arch.tag());
    return pretrained;
}

/// One weight transfer between a router and the coordinator.
struct WeightMessage {
    int round = 0;
    NodeId sender;
    NodeId receiver;
    std::size_t bytes = 0;
    std::string path; // hops taken through the router tree, e.g. "R3>R2>C"
    bool operator==(const WeightMessage&) const = default;
};

struct FLConfig {
    Micros round_interval = std::chrono::minutes{60};
    int rounds = 5;
    TrainConfig local_train;
    std::vector<NodeId> client_roster{kRouters.begin(), kRouters.end()};

    void validate() const {
        if (rounds < 1) throw ConfigError("rounds must be at least 1");
        if (client_roster.empty()) throw EmptyRoster("federated roster is empty");
        for (auto r : client_roster)
            if (!r.is_router()) throw ConfigError(r.str() + " is not a router");
        local_train.validate();
    }
};

/// Data each client receives, one chunk per round.
using ClientStream = std::vector<Dataset>;

struct FLResult {
    ModelWeights<float> global;
    std::vector<ModelWeights<float>> round_globals;
    std::vector<WeightMessage> ledger;
    std::map<NodeId, std::vector<std::vector<double>>> loss_history; // per client, per round
};

inline std::string tree_path(const Topology& topo, NodeId r, bool downlink) {
    std::vector<NodeId> hops{r};
    for (NodeId at = r; !at.is_coordinator() && hops.size() <= kHopLimit;) {
        at = parent_of(topo, at);
        hops.push_back(at);
    }
    if (downlink) std::reverse(hops.begin(), hops.end());
    std::string s;
    for (std::size_t i = 0; i < hops.size(); ++i) s += (i ? ">" : "") + hops[i].str();
    return s;
}

/// Rounds of local training from the current global model followed by tree
/// aggregation and redistribution. Optimizer state stays on each client; only
/// weights travel. Clients train concurrently.
inline FLResult run_federated_training(const FLConfig& cfg, const Topology& topo, const ModelWeights<float>& pretrained,
                                       const std::map<NodeId, ClientStream>& streams) {
    cfg.validate();
    const auto roster = canonical_roster(cfg.client_roster);
    const auto arch = pretrained.architecture();
    const auto payload = serialize_weights(pretrained).size();

    FLResult res;
    res.global = transfer_init(pretrained, arch);
    std::map<NodeId, AdamState<float>> optim;
    for (auto r : roster) optim.emplace(r, AdamState<float>::like(pretrained));

    for (int round = 1; round <= cfg.rounds; ++round) {
        std::map<NodeId, std::future<TrainResult<float>>> jobs;
        for (auto r : roster) {
            auto it = streams.find(r);
            const Dataset* chunk = nullptr;
            if (it != streams.end() && static_cast<std::size_t>(round - 1) < it->second.size() &&
                !it->second[static_cast<std::size_t>(round - 1)].empty())
                chunk = &it->second[static_cast<std::size_t>(round - 1)];
            auto local_cfg = cfg.local_train;
            local_cfg.seed = cfg.local_train.seed + static_cast<std::uint64_t>(round);
            AdamState<float>* state = &optim.at(r);
            const ModelWeights<float> start = res.global;
            jobs.emplace(r, std::async(std::launch::async, [chunk, local_cfg, state, start] {
                             if (!chunk) return TrainResult<float>{start, {}};
                             return train<float>(start, *chunk, local_cfg, state);
                         }));
        }
        std::map<NodeId, ModelWeights<float>> locals;
        for (auto& [r, job] : jobs) {
            auto tr = job.get();
            res.loss_history[r].push_back(std::move(tr.loss_history));
            locals.emplace(r, std::move(tr.weights));
        }
        res.global = hierarchical_round<double>(topo, locals, roster);
        res.round_globals.push_back(res.global);
        for (auto r : roster)
            res.ledger.push_back({round, r, NodeId::coordinator(), payload, tree_path(topo, r, false)});
        for (auto r : roster)
            res.ledger.push_back({round, NodeId::coordinator(), r, payload, tree_path(topo, r, true)});
    }
    return res;
}

inline std::size_t ledger_bytes(std::span<const WeightMessage> ledger) {
    std::size_t total = 0;
    for (const auto& m : ledger) total += m.bytes;
    return total;
}

} // namespace fedids

#endif // FEDIDS_FEDERATED_HPP
