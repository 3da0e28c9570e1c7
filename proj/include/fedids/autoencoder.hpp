#ifndef FEDIDS_AUTOENCODER_HPP
#define FEDIDS_AUTOENCODER_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedids/error.hpp"

namespace fedids {

enum class Activation : std::uint8_t { ReLU = 0, Sigmoid = 1 };

/// Layer widths plus the activation applied after each dense layer.
struct Architecture {
    std::vector<std::size_t> dims;
    std::vector<Activation> activations;

    /// 31 -> 32 -> 16 -> 32 -> 31; ReLU encoder, sigmoid decoder.
    static Architecture standard() {
        return {{31, 32, 16, 32, 31},
                {Activation::ReLU, Activation::ReLU, Activation::Sigmoid, Activation::Sigmoid}};
    }

    /// Single-layer 31 -> 18 -> 31 variant.
    static Architecture latent18() { return {{31, 18, 31}, {Activation::ReLU, Activation::Sigmoid}}; }

    std::size_t input_dim() const { return dims.front(); }
    std::size_t output_dim() const { return dims.back(); }

    /// e.g. "31-32r-16r-32s-31s"
    std::string tag() const {
        std::string t = std::to_string(dims.front());
        for (std::size_t i = 0; i < activations.size(); ++i)
            t += "-" + std::to_string(dims[i + 1]) + (activations[i] == Activation::ReLU ? "r" : "s");
        return t;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) n += dims[i] * dims[i + 1] + dims[i + 1];
        return n;
    }

    void validate() const {
        if (dims.size() < 2 || activations.size() + 1 != dims.size())
            throw ShapeMismatch("architecture needs one activation per layer");
        for (auto d : dims)
            if (d == 0) throw ShapeMismatch("zero-width layer");
    }

    bool operator==(const Architecture&) const = default;
};

template <class T>
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::ReLU;
    std::vector<T> weight; // out x in, row-major
    std::vector<T> bias;   // out

    bool operator==(const DenseLayer&) const = default;
};

/// Ordered dense-layer parameters. The same shape doubles as the container for
/// gradients and Adam moments.
template <class T>
struct ModelWeights {
    std::vector<DenseLayer<T>> layers;

    static ModelWeights zeros(const Architecture& arch) {
        arch.validate();
        ModelWeights w;
        for (std::size_t i = 0; i + 1 < arch.dims.size(); ++i) {
            DenseLayer<T> l;
            l.in = arch.dims[i];
            l.out = arch.dims[i + 1];
            l.activation = arch.activations[i];
            l.weight.assign(l.in * l.out, T(0));
            l.bias.assign(l.out, T(0));
            w.layers.push_back(std::move(l));
        }
        return w;
    }

    /// Glorot-uniform weights, zero biases.
    static ModelWeights glorot(const Architecture& arch, std::uint64_t seed) {
        auto w = zeros(arch);
        std::mt19937_64 rng(seed);
        for (auto& l : w.layers) {
            const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (auto& x : l.weight) x = static_cast<T>(u(rng));
        }
        return w;
    }

    Architecture architecture() const {
        Architecture a;
        if (layers.empty()) return a;
        a.dims.push_back(layers.front().in);
        for (const auto& l : layers) {
            a.dims.push_back(l.out);
            a.activations.push_back(l.activation);
        }
        return a;
    }

    std::string tag() const { return architecture().tag(); }

    bool same_shape(const ModelWeights& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].in != o.layers[i].in || layers[i].out != o.layers[i].out ||
                layers[i].activation != o.layers[i].activation)
                return false;
        return true;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Visits every parameter in serialization order: per layer, W row-major then b.
    template <class F>
    void for_each(F&& f) {
        for (auto& l : layers) {
            for (auto& x : l.weight) f(x);
            for (auto& x : l.bias) f(x);
        }
    }
    template <class F>
    void for_each(F&& f) const {
        for (const auto& l : layers) {
            for (const auto& x : l.weight) f(x);
            for (const auto& x : l.bias) f(x);
        }
    }

    bool all_finite() const {
        bool ok = true;
        for_each([&](T x) { ok = ok && std::isfinite(static_cast<double>(x)); });
        return ok;
    }

    template <class U>
    ModelWeights<U> cast() const {
        ModelWeights<U> w;
        for (const auto& l : layers)
            w.layers.push_back({l.in, l.out, l.activation, std::vector<U>(l.weight.begin(), l.weight.end()),
                                std::vector<U>(l.bias.begin(), l.bias.end())});
        return w;
    }

    bool operator==(const ModelWeights&) const = default;
};

template <class T>
using Gradients = ModelWeights<T>;

/// Per-layer activations of one forward pass; post[0] is the input.
template <class T>
struct ForwardCache {
    std::vector<std::vector<T>> pre;
    std::vector<std::vector<T>> post;

    const std::vector<T>& output() const { return post.back(); }
};

namespace detail {

template <class T>
T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

} // namespace detail

template <class T>
ForwardCache<T> forward(const ModelWeights<T>& w, std::span<const T> x) {
    if (w.layers.empty() || x.size() != w.layers.front().in)
        throw ShapeMismatch("input has " + std::to_string(x.size()) + " values, model expects " +
                            std::to_string(w.layers.empty() ? 0 : w.layers.front().in));
    ForwardCache<T> c;
    c.post.emplace_back(x.begin(), x.end());
    for (const auto& l : w.layers) {
        const auto& in = c.post.back();
        std::vector<T> z(l.out), a(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            T acc = l.bias[o];
            const T* row = &l.weight[o * l.in];
            for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * in[i];
            z[o] = acc;
            a[o] = l.activation == Activation::ReLU ? std::max(acc, T(0)) : detail::sigmoid(acc);
        }
        c.pre.push_back(std::move(z));
        c.post.push_back(std::move(a));
    }
    return c;
}

template <class T>
std::vector<T> reconstruct(const ModelWeights<T>& w, std::span<const T> x) {
    return forward(w, x).output();
}

/// Squared reconstruction error ||x - x_hat||^2 of one sample.
template <class T>
T sample_loss(const ModelWeights<T>& w, std::span<const T> x) {
    const auto c = forward(w, x);
    T s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c.output()[i]) * (x[i] - c.output()[i]);
    return s;
}

using Sample = std::vector<float>;
using Dataset = std::vector<Sample>;

/// Mean over the batch of per-sample squared error.
template <class T>
T reconstruction_loss(const ModelWeights<T>& w, const std::vector<std::vector<T>>& batch) {
    if (batch.empty()) throw EmptyDataset("loss of an empty batch");
    T s = 0;
    for (const auto& x : batch) s += sample_loss<T>(w, x);
    return s / static_cast<T>(batch.size());
}

/// Gradient of reconstruction_loss over `batch`, given each sample's cache.
template <class T>
Gradients<T> backward(const ModelWeights<T>& w, const std::vector<std::vector<T>>& batch,
                      const std::vector<ForwardCache<T>>& caches) {
    if (batch.size() != caches.size()) throw ShapeMismatch("one cache per batch sample required");
    auto g = Gradients<T>::zeros(w.architecture());
    const T scale = T(2) / static_cast<T>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& c = caches[b];
        if (c.post.size() != w.layers.size() + 1 || c.post.front().size() != batch[b].size())
            throw ShapeMismatch("cache does not match model");
        const auto& out = c.output();
        std::vector<T> delta(out.size()); // dL/d(post) of the current layer
        for (std::size_t i = 0; i < out.size(); ++i) delta[i] = scale * (out[i] - batch[b][i]);
        for (std::size_t li = w.layers.size(); li-- > 0;) {
            const auto& l = w.layers[li];
            auto& gl = g.layers[li];
            const auto& a = c.post[li + 1];
            const auto& z = c.pre[li];
            const auto& in = c.post[li];
            for (std::size_t o = 0; o < l.out; ++o) {
                delta[o] *= l.activation == Activation::ReLU ? (z[o] > T(0) ? T(1) : T(0)) : a[o] * (T(1) - a[o]);
            }
            std::vector<T> prev(l.in, T(0));
            for (std::size_t o = 0; o < l.out; ++o) {
                const T d = delta[o];
                gl.bias[o] += d;
                if (d == T(0)) continue;
                T* grow = &gl.weight[o * l.in];
                const T* wrow = &l.weight[o * l.in];
                for (std::size_t i = 0; i < l.in; ++i) {
                    grow[i] += d * in[i];
                    prev[i] += d * wrow[i];
                }
            }
            delta = std::move(prev);
        }
    }
    return g;
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.001;
    AdamConfig adam;
    std::uint64_t seed = 7;
    bool shuffle = true;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be at least 1");
        if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    }
};

template <class T>
struct AdamState {
    ModelWeights<T> m;
    ModelWeights<T> v;
    long long t = 0;

    static AdamState like(const ModelWeights<T>& w) {
        auto z = ModelWeights<T>::zeros(w.architecture());
        return {z, z, 0};
    }
};

/// Bias-corrected Adam update, in place.
template <class T>
void adam_step(ModelWeights<T>& w, const Gradients<T>& g, AdamState<T>& s, const TrainConfig& cfg) {
    if (!w.same_shape(g) || !w.same_shape(s.m) || !w.same_shape(s.v))
        throw ShapeMismatch("adam step on mismatched shapes");
    ++s.t;
    const double b1 = cfg.adam.beta1, b2 = cfg.adam.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    auto update = [&](std::vector<T>& p, const std::vector<T>& gp, std::vector<T>& m, std::vector<T>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * gp[i]);
            v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * gp[i] * gp[i]);
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] = static_cast<T>(p[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam.epsilon));
        }
    };
    for (std::size_t li = 0; li < w.layers.size(); ++li) {
        auto& l = w.layers[li];
        update(l.weight, g.layers[li].weight, s.m.layers[li].weight, s.v.layers[li].weight);
        update(l.bias, g.layers[li].bias, s.m.layers[li].bias, s.v.layers[li].bias);
    }
}

template <class T>
struct TrainResult {
    ModelWeights<T> weights;
    std::vector<double> loss_history; // mean sample loss seen during each epoch
};

/// Mini-batch Adam training. `state` carries optimizer moments across calls
/// (federated clients keep theirs between rounds); pass nullptr for a fresh one.
template <class T>
TrainResult<T> train(ModelWeights<T> w, const std::vector<std::vector<T>>& data, const TrainConfig& cfg,
                     AdamState<T>* state = nullptr) {
    cfg.validate();
    if (data.empty()) throw EmptyDataset("training set is empty");
    AdamState<T> local = AdamState<T>::like(w);
    AdamState<T>& adam = state ? *state : local;
    if (!adam.m.same_shape(w)) adam = AdamState<T>::like(w);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    TrainResult<T> res;
    std::vector<std::vector<T>> batch;
    std::vector<ForwardCache<T>> caches;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            caches.clear();
            for (auto i = start; i < end; ++i) {
                batch.push_back(data[order[i]]);
                caches.push_back(forward<T>(w, batch.back()));
                const auto& out = caches.back().output();
                for (std::size_t j = 0; j < out.size(); ++j)
                    epoch_loss += static_cast<double>((batch.back()[j] - out[j]) * (batch.back()[j] - out[j]));
            }
            adam_step(w, backward(w, batch, caches), adam, cfg);
        }
        res.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    res.weights = std::move(w);
    return res;
}

// Weight file layout (all integers little-endian):
//   "FAEW" | u16 version | u16 layer count | u32 FNV-1a of the architecture tag
//   | u32 parameter count
//   per layer: u16 in | u16 out | u8 activation | u8 reserved
//   zero padding up to a multiple of 64 bytes, so the body stays aligned
//   then per layer W (row-major) and b as f32
inline constexpr std::uint16_t kWeightFormatVersion = 1;
inline constexpr std::size_t kWeightHeaderAlign = 64;

inline std::uint32_t fnv1a(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::string_view in, std::size_t& pos, int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > in.size()) throw ShapeMismatch("weight file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(bytes);
    return v;
}

} // namespace detail

inline std::string serialize_weights(const ModelWeights<float>& w) {
    std::string out = "FAEW";
    detail::put_le(out, kWeightFormatVersion, 2);
    detail::put_le(out, w.layers.size(), 2);
    detail::put_le(out, fnv1a(w.tag()), 4);
    detail::put_le(out, w.parameter_count(), 4);
    for (const auto& l : w.layers) {
        detail::put_le(out, l.in, 2);
        detail::put_le(out, l.out, 2);
        detail::put_le(out, static_cast<std::uint8_t>(l.activation), 1);
        detail::put_le(out, 0, 1);
    }
    out.resize((out.size() + kWeightHeaderAlign - 1) / kWeightHeaderAlign * kWeightHeaderAlign, '\0');
    w.for_each([&](float x) { detail::put_le(out, std::bit_cast<std::uint32_t>(x), 4); });
    return out;
}

inline ModelWeights<float> deserialize_weights(std::string_view in) {
    if (in.substr(0, 4) != "FAEW") throw ShapeMismatch("not a weight file");
    std::size_t pos = 4;
    if (detail::get_le(in, pos, 2) != kWeightFormatVersion) throw ShapeMismatch("unsupported weight file version");
    const auto layers = detail::get_le(in, pos, 2);
    const auto tag = static_cast<std::uint32_t>(detail::get_le(in, pos, 4));
    const auto params = detail::get_le(in, pos, 4);
    Architecture arch;
    for (std::uint64_t i = 0; i < layers; ++i) {
        const auto li = detail::get_le(in, pos, 2);
        const auto lo = detail::get_le(in, pos, 2);
        const auto act = detail::get_le(in, pos, 1);
        detail::get_le(in, pos, 1);
        if (act > 1) throw ShapeMismatch("unknown activation code");
        if (arch.dims.empty()) arch.dims.push_back(li);
        else if (arch.dims.back() != li) throw ShapeMismatch("layer widths do not chain");
        arch.dims.push_back(lo);
        arch.activations.push_back(static_cast<Activation>(act));
    }
    if (fnv1a(arch.tag()) != tag) throw ShapeMismatch("architecture tag mismatch");
    if (arch.parameter_count() != params) throw ShapeMismatch("parameter count mismatch");
    while (pos % kWeightHeaderAlign != 0)
        if (detail::get_le(in, pos, 1) != 0) throw ShapeMismatch("nonzero header padding");
    auto w = ModelWeights<float>::zeros(arch);
    w.for_each([&](float& x) { x = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(in, pos, 4))); });
    if (pos != in.size()) throw ShapeMismatch("trailing bytes in weight file");
    return w;
}

} // namespace fedids

#endif // FEDIDS_AUTOENCODER_HPP
