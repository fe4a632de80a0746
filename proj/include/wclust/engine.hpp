#pragma once

// Reference inference at toy scale: im2col + GEMM convolution, and the
// codebook-indirect GEMM that reads weights through a centroid table.
// Accumulation order is fixed to (i, k, j) everywhere so results are
// bit-reproducible; build with -ffp-contract=off.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstring>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wclust/cluster.hpp"
#include "wclust/error.hpp"
#include "wclust/netdef.hpp"
#include "wclust/weights_io.hpp"

namespace wclust {

/// Row-major float matrix with an explicit leading dimension.
struct Matrix {
    int rows = 0;
    int cols = 0;
    int ld = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c, int leading = 0)
        : rows(r), cols(c), ld(leading ? leading : c), data(static_cast<std::size_t>(r) * ld, 0.0f) {
        if (ld < cols) throw ArgumentError("leading dimension smaller than column count");
    }
    float& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * ld + j]; }
    float operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * ld + j]; }
};

/// Channel-major (C, H, W) activation tensor.
struct Tensor {
    TensorShape shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(TensorShape s) : shape(s), data(s.elements(), 0.0f) {}
    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x]; }
};

template <class T>
concept IndexSource = requires(const T& s, std::size_t j) {
    { s[j] } -> std::convertible_to<std::uint32_t>;
    { s.size() } -> std::convertible_to<std::size_t>;
};

/// Window into a packed index stream, decoded on every access.
struct PackedIndexView {
    const PackedIndices* packed = nullptr;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    std::uint32_t operator[](std::size_t j) const { return (*packed)[offset + j]; }
    std::size_t size() const { return static_cast<std::size_t>(length); }
};

namespace detail {

inline void check_gemm(int M, int N, int K, std::size_t a_size, int lda, std::size_t b_size, int ldb,
                       std::size_t c_size, int ldc) {
    if (M < 0 || N < 0 || K < 0) throw ArgumentError("negative GEMM dimension");
    if (lda < K || ldb < N || ldc < N) throw ArgumentError("GEMM leading dimension too small");
    const auto need = [](int rows, int ld, int cols) {
        return rows == 0 || cols == 0 ? std::size_t{0}
                                      : static_cast<std::size_t>(rows - 1) * ld + static_cast<std::size_t>(cols);
    };
    if (a_size < need(M, lda, K) || b_size < need(K, ldb, N) || c_size < need(M, ldc, N))
        throw ArgumentError("GEMM operand smaller than its dimensions");
}

}  // namespace detail

/// C += alpha * A * B, with Darknet's (i, k, j) loop nest.
inline void gemm_nn(int M, int N, int K, float alpha, std::span<const float> A, int lda, std::span<const float> B,
                    int ldb, std::span<float> C, int ldc) {
    detail::check_gemm(M, N, K, A.size(), lda, B.size(), ldb, C.size(), ldc);
    for (int i = 0; i < M; ++i) {
        for (int k = 0; k < K; ++k) {
            const float a_part = alpha * A[static_cast<std::size_t>(i) * lda + k];
            for (int j = 0; j < N; ++j)
                C[static_cast<std::size_t>(i) * ldc + j] += a_part * B[static_cast<std::size_t>(k) * ldb + j];
        }
    }
}

/// gemm_nn with A[i, k] read as centroids[indexes[i * lda + k]].
template <IndexSource Indexes>
void gemm_nn_centroids(int M, int N, int K, float alpha, std::span<const float> centroids, const Indexes& indexes,
                       int lda, std::span<const float> B, int ldb, std::span<float> C, int ldc) {
    detail::check_gemm(M, N, K, indexes.size(), lda, B.size(), ldb, C.size(), ldc);
    for (int i = 0; i < M; ++i) {
        for (int k = 0; k < K; ++k) {
            const std::uint32_t idx = indexes[static_cast<std::size_t>(i) * lda + k];
            if (idx >= centroids.size())
                throw ArgumentError("weight index " + std::to_string(idx) + " outside centroid table");
            const float a_part = alpha * centroids[idx];
            for (int j = 0; j < N; ++j)
                C[static_cast<std::size_t>(i) * ldc + j] += a_part * B[static_cast<std::size_t>(k) * ldb + j];
        }
    }
}

/// Unrolls every kernel window into a (C*K*K) x (O_h*O_w) column matrix.
inline std::vector<float> im2col(const Tensor& in, int kernel, int stride, int pad, int out_h, int out_w) {
    const int channels_col = in.shape.c * kernel * kernel;
    std::vector<float> col(static_cast<std::size_t>(channels_col) * out_h * out_w, 0.0f);
    for (int c = 0; c < channels_col; ++c) {
        const int w_offset = c % kernel;
        const int h_offset = (c / kernel) % kernel;
        const int c_im = c / kernel / kernel;
        for (int h = 0; h < out_h; ++h) {
            for (int w = 0; w < out_w; ++w) {
                const int row = h_offset + h * stride - pad;
                const int column = w_offset + w * stride - pad;
                if (row >= 0 && row < in.shape.h && column >= 0 && column < in.shape.w)
                    col[(static_cast<std::size_t>(c) * out_h + h) * out_w + w] = in.at(c_im, row, column);
            }
        }
    }
    return col;
}

namespace detail {

/// Batch norm (Darknet form), bias and activation over a freshly computed GEMM output.
inline void finish_conv(const ConvSpec& conv, const ConvParams& params, Tensor& out) {
    const std::size_t plane = static_cast<std::size_t>(out.shape.h) * out.shape.w;
    for (int f = 0; f < out.shape.c; ++f) {
        float* y = out.data.data() + static_cast<std::size_t>(f) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            float v = y[p];
            if (conv.batch_normalize) {
                v = (v - params.rolling_mean[f]) / (std::sqrt(params.rolling_variance[f]) + .000001f);
                v *= params.scales[f];
            }
            v += params.biases[f];
            if (conv.activation == Activation::leaky && v < 0) v *= 0.1f;
            y[p] = v;
        }
    }
}

inline void check_conv(const LayerSpec& layer, const Tensor& in, const ConvParams& params, std::size_t n_weights) {
    if (!layer.is_conv()) throw ArgumentError("conv_forward on a non-convolutional layer");
    if (in.shape != layer.in_shape) throw ShapeError("convolution input does not match the layer's input shape");
    const auto f = static_cast<std::size_t>(layer.conv().filters);
    if (n_weights != conv_weight_count(layer) || params.biases.size() != f)
        throw ShapeError("convolution parameters do not match the layer");
    if (layer.conv().batch_normalize &&
        (params.scales.size() != f || params.rolling_mean.size() != f || params.rolling_variance.size() != f))
        throw ShapeError("missing batch-norm parameters");
}

}  // namespace detail

/// Convolution with dense kernel weights.
inline Tensor conv_forward(const LayerSpec& layer, const Tensor& in, const ConvParams& params) {
    detail::check_conv(layer, in, params, params.weights.size());
    const auto& conv = layer.conv();
    Tensor out(layer.out_shape);
    const int n = out.shape.h * out.shape.w, k = in.shape.c * conv.kernel * conv.kernel;
    const auto col = im2col(in, conv.kernel, conv.stride, conv.pad, out.shape.h, out.shape.w);
    gemm_nn(conv.filters, n, k, 1.0f, params.weights, k, col, n, out.data, n);
    detail::finish_conv(conv, params, out);
    return out;
}

/// Convolution whose kernel weights are fetched through a centroid table.
/// `params.weights` is ignored; biases and batch norm come from `params`.
template <IndexSource Indexes>
Tensor conv_forward(const LayerSpec& layer, const Tensor& in, const ConvParams& params,
                    std::span<const float> centroids, const Indexes& indexes) {
    detail::check_conv(layer, in, params, indexes.size());
    const auto& conv = layer.conv();
    Tensor out(layer.out_shape);
    const int n = out.shape.h * out.shape.w, k = in.shape.c * conv.kernel * conv.kernel;
    const auto col = im2col(in, conv.kernel, conv.stride, conv.pad, out.shape.h, out.shape.w);
    gemm_nn_centroids(conv.filters, n, k, 1.0f, centroids, indexes, k, col, n, out.data, n);
    detail::finish_conv(conv, params, out);
    return out;
}

namespace detail {

inline Tensor shortcut_forward(const Tensor& prev, const Tensor& from) {
    if (prev.shape != from.shape) throw ShapeError("shortcut operands differ in shape");
    Tensor out = prev;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += from.data[i];
    return out;
}

inline Tensor route_forward(const std::vector<Tensor>& outputs, const RouteSpec& route, TensorShape shape) {
    Tensor out(shape);
    std::size_t pos = 0;
    for (int src : route.sources) {
        const auto& t = outputs[static_cast<std::size_t>(src)].data;
        std::copy(t.begin(), t.end(), out.data.begin() + static_cast<std::ptrdiff_t>(pos));
        pos += t.size();
    }
    return out;
}

inline Tensor upsample_forward(const Tensor& in, int factor) {
    Tensor out({in.shape.h * factor, in.shape.w * factor, in.shape.c});
    for (int c = 0; c < out.shape.c; ++c)
        for (int y = 0; y < out.shape.h; ++y)
            for (int x = 0; x < out.shape.w; ++x) out.at(c, y, x) = in.at(c, y / factor, x / factor);
    return out;
}

template <class ConvFn>
std::vector<Tensor> run_layers(const NetworkDef& net, const Tensor& input, ConvFn&& conv_fn) {
    if (input.shape != net.input) throw ShapeError("network input has the wrong shape");
    std::vector<Tensor> outputs;
    outputs.reserve(net.layers.size());
    std::size_t conv_ordinal = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& layer = net.layers[i];
        const Tensor& prev = i == 0 ? input : outputs.back();
        Tensor out;
        if (layer.is_conv()) {
            out = conv_fn(conv_ordinal++, layer, prev);
        } else if (const auto* sc = std::get_if<ShortcutSpec>(&layer.kind)) {
            out = shortcut_forward(prev, outputs[static_cast<std::size_t>(sc->from)]);
        } else if (const auto* route = std::get_if<RouteSpec>(&layer.kind)) {
            out = route_forward(outputs, *route, layer.out_shape);
        } else if (const auto* up = std::get_if<UpsampleSpec>(&layer.kind)) {
            out = upsample_forward(prev, up->factor);
        } else {
            out = prev;  // yolo: raw activations, decoded downstream
        }
        if (out.shape != layer.out_shape)
            throw ShapeError("layer " + std::to_string(i) + " produced an unexpected shape");
        outputs.push_back(std::move(out));
    }
    return outputs;
}

}  // namespace detail

/// Runs every layer and returns each layer's output.
inline std::vector<Tensor> run_network(const NetworkDef& net, const DarknetWeights& weights, const Tensor& input) {
    if (weights.layers.size() != conv_layer_indices(net).size())
        throw ShapeError("weights do not cover every convolutional layer");
    return detail::run_layers(net, input, [&](std::size_t ordinal, const LayerSpec& layer, const Tensor& in) {
        return conv_forward(layer, in, weights.layers[ordinal]);
    });
}

enum class IndexMode {
    packed,    // decode the packed stream inside the GEMM
    unpacked,  // unpack to one index per weight first
};

/// Runs the network with kernel weights read through the clustered model's
/// centroid tables. Biases and batch norm come from `weights`.
inline std::vector<Tensor> run_network(const NetworkDef& net, const DarknetWeights& weights,
                                       const ClusteredModel& model, const Tensor& input,
                                       IndexMode mode = IndexMode::packed) {
    const auto conv_layers = conv_layer_indices(net);
    if (weights.layers.size() != conv_layers.size())
        throw ShapeError("weights do not cover every convolutional layer");
    const bool global = model.scope == Scope::all_layers;
    if (global ? model.tables.size() != 1 : model.tables.size() != conv_layers.size())
        throw ShapeError("clustered model does not match the network's convolutional layers");

    std::vector<std::vector<std::uint32_t>> unpacked;
    if (mode == IndexMode::unpacked)
        for (const auto& t : model.tables) unpacked.push_back(unpack_indices(t.indices));

    std::uint64_t offset = 0;
    return detail::run_layers(net, input, [&](std::size_t ordinal, const LayerSpec& layer, const Tensor& in) {
        const std::size_t t = global ? 0 : ordinal;
        const auto& table = model.tables[t];
        if (!global && table.layer_id != conv_layers[ordinal])
            throw ShapeError("clustered table does not belong to layer " + std::to_string(conv_layers[ordinal]));
        const std::uint64_t n = conv_weight_count(layer);
        const std::uint64_t start = global ? offset : 0;
        if (start + n > table.indices.count) throw ShapeError("clustered model has too few indices");
        offset += n;
        const std::span<const float> centroids = table.table.centroids;
        if (mode == IndexMode::unpacked) {
            const std::span<const std::uint32_t> idx(unpacked[t].data() + start, static_cast<std::size_t>(n));
            return conv_forward(layer, in, weights.layers[ordinal], centroids, idx);
        }
        return conv_forward(layer, in, weights.layers[ordinal], centroids, PackedIndexView{&table.indices, start, n});
    });
}

/// Mean squared difference of two equally shaped tensors.
inline double mse(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw ShapeError("mse of differently shaped tensors");
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        s += d * d;
    }
    return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data.size() == b.data.size() &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace wclust
