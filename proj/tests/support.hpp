#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "driftnet/network.hpp"
#include "driftnet/sde_model.hpp"

namespace driftnet::testing {

/// Dense network with N(0, 1) weights and shifts, rescaled so that the
/// largest absolute parameter equals `bound` (when bound > 0).
inline ReluNetwork random_network(const std::vector<std::size_t>& widths, std::uint64_t seed, double bound = 0.0,
                                  double shift_scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<Matrix> w;
    std::vector<Vector> v;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Matrix m(static_cast<Eigen::Index>(widths[l + 1]), static_cast<Eigen::Index>(widths[l]));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
        w.push_back(m);
        if (l + 2 < widths.size()) {
            Vector s(static_cast<Eigen::Index>(widths[l + 1]));
            for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = shift_scale * normal(rng);
            v.push_back(s);
        }
    }
    ReluNetwork net(std::move(w), std::move(v));
    if (bound > 0.0) {
        const double b = max_weight(net);
        for (std::size_t l = 0; l < net.weights().size(); ++l) net.weight(l) *= bound / b;
        for (std::size_t l = 1; l <= net.depth(); ++l) net.shift(l) *= bound / b;
    }
    return net;
}

/// Scalar diagonal model dX = a X dt + theta X dW (geometric Brownian motion).
inline SdeModel geometric_brownian_motion(double a, double theta) {
    return SdeModel(
        1, 1, [a](std::span<const double> x, std::span<double> out) { out[0] = a * x[0]; },
        [theta](std::span<const double> x, std::span<double> out) { out[0] = theta * x[0]; },
        [theta](std::span<const double>, std::size_t, std::span<double> out) { out[0] = theta; }, true);
}

/// Model with constant drift b and constant diagonal diffusion sigma.
inline SdeModel constant_model(std::vector<double> b, std::vector<double> sigma) {
    const std::size_t d = b.size();
    return SdeModel(
        d, d,
        [b](std::span<const double>, std::span<double> out) {
            for (std::size_t i = 0; i < b.size(); ++i) out[i] = b[i];
        },
        [sigma](std::span<const double>, std::span<double> out) {
            const std::size_t n = sigma.size();
            for (std::size_t i = 0; i < n * n; ++i) out[i] = 0.0;
            for (std::size_t i = 0; i < n; ++i) out[i * n + i] = sigma[i];
        },
        [d](std::span<const double>, std::size_t, std::span<double> out) {
            for (std::size_t i = 0; i < d * d; ++i) out[i] = 0.0;
        },
        true);
}

} // namespace driftnet::testing
