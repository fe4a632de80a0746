#pragma once

// Deterministic synthetic weights and inputs for toy networks. Only the raw
// 64-bit engine output is used, so streams are identical across standard
// libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "wclust/cluster.hpp"
#include "wclust/engine.hpp"
#include "wclust/netdef.hpp"
#include "wclust/weights_io.hpp"

namespace wclust {

class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return detail::unit_uniform(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// He-scaled normal kernel weights, small biases, and plausible batch-norm
/// statistics for every convolutional layer.
inline DarknetWeights synth_weights(const NetworkDef& net, std::uint64_t seed) {
    SynthRng rng(seed);
    DarknetWeights w;
    for (std::size_t i : conv_layer_indices(net)) {
        const auto& layer = net.layers[i];
        const auto& conv = layer.conv();
        const auto f = static_cast<std::size_t>(conv.filters);
        const double fan_in = static_cast<double>(layer.in_shape.c) * conv.kernel * conv.kernel;
        const double scale = std::sqrt(2.0 / fan_in);
        ConvParams p;
        p.weights.resize(conv_weight_count(layer));
        for (auto& v : p.weights) v = static_cast<float>(rng.normal() * scale);
        p.biases.resize(f);
        for (auto& v : p.biases) v = static_cast<float>(rng.uniform(-0.1, 0.1));
        if (conv.batch_normalize) {
            p.scales.resize(f);
            p.rolling_mean.resize(f);
            p.rolling_variance.resize(f);
            for (std::size_t j = 0; j < f; ++j) {
                p.scales[j] = static_cast<float>(rng.uniform(0.5, 1.5));
                p.rolling_mean[j] = static_cast<float>(rng.uniform(-0.2, 0.2));
                p.rolling_variance[j] = static_cast<float>(rng.uniform(0.5, 2.0));
            }
        }
        w.layer_index.push_back(i);
        w.layers.push_back(std::move(p));
    }
    return w;
}

/// Uniform [0, 1) input image, like a normalized RGB frame.
inline Tensor synth_input(TensorShape shape, std::uint64_t seed) {
    SynthRng rng(seed);
    Tensor t(shape);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

}  // namespace wclust
