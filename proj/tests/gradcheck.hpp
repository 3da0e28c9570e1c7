#ifndef FEDIDS_TESTS_GRADCHECK_HPP
#define FEDIDS_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <random>

#include "fedids/autoencoder.hpp"

namespace gradcheck {

/// Random autoencoder shape 31 -> h1 -> ... -> 31 with ReLU encoder layers
/// and sigmoid decoder layers.
inline fedids::Architecture random_architecture(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> width(2, 24);
    std::uniform_int_distribution<int> depth(1, 2);
    fedids::Architecture a;
    a.dims.push_back(31);
    const int enc = depth(rng), dec = depth(rng);
    for (int i = 0; i < enc; ++i) {
        a.dims.push_back(width(rng));
        a.activations.push_back(fedids::Activation::ReLU);
    }
    for (int i = 0; i + 1 < dec; ++i) {
        a.dims.push_back(width(rng));
        a.activations.push_back(fedids::Activation::Sigmoid);
    }
    a.dims.push_back(31);
    a.activations.push_back(fedids::Activation::Sigmoid);
    return a;
}

/// Max over all parameters of |analytic - numeric| / max(|analytic| + |numeric|, floor),
/// with central differences of step h at double precision.
inline double max_relative_error(const fedids::ModelWeights<double>& w, const std::vector<std::vector<double>>& batch,
                                 double h = 1e-5, double floor = 1e-7) {
    std::vector<fedids::ForwardCache<double>> caches;
    for (const auto& x : batch) caches.push_back(fedids::forward<double>(w, x));
    const auto g = fedids::backward(w, batch, caches);

    std::vector<double> analytic;
    g.for_each([&](double v) { analytic.push_back(v); });
    auto probe = w;
    std::vector<double*> params;
    probe.for_each([&](double& v) { params.push_back(&v); });

    double worst = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + h;
        const double up = fedids::reconstruction_loss(probe, batch);
        *params[i] = saved - h;
        const double down = fedids::reconstruction_loss(probe, batch);
        *params[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]) + std::abs(numeric), floor);
        worst = std::max(worst, err);
    }
    return worst;
}

/// One random model and batch of 4 inputs in [0,1], checked end to end.
inline double check_random_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto arch = random_architecture(rng);
    auto w = fedids::ModelWeights<double>::glorot(arch, seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> bias(0.0, 0.1);
    for (auto& l : w.layers)
        for (auto& b : l.bias) b = bias(rng);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<double>> batch(4, std::vector<double>(31));
    for (auto& x : batch)
        for (auto& v : x) v = u(rng);
    return max_relative_error(w, batch);
}

} // namespace gradcheck

#endif
