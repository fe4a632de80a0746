#pragma once

// Element-level DRAM access counts and FP operation counts for an
// output-stationary accelerator. Partial sums stay in the PE register
// files, so every convolution output is written exactly once and never
// read back.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "wclust/error.hpp"
#include "wclust/netdef.hpp"

namespace wclust {

/// Element (32-bit) access counts of one layer or of a whole network.
struct AccessProfile {
    std::uint64_t weight_reads = 0;
    std::uint64_t input_reads = 0;
    std::uint64_t output_reads = 0;
    std::uint64_t output_writes = 0;

    std::uint64_t reads() const { return weight_reads + input_reads + output_reads; }
    std::uint64_t total() const { return reads() + output_writes; }

    AccessProfile& operator+=(const AccessProfile& o) {
        weight_reads += o.weight_reads;
        input_reads += o.input_reads;
        output_reads += o.output_reads;
        output_writes += o.output_writes;
        return *this;
    }
    bool operator==(const AccessProfile&) const = default;
};

struct OpProfile {
    std::uint64_t macs = 0;
    std::uint64_t fp_add = 0;
    std::uint64_t fp_sub = 0;
    std::uint64_t fp_mul = 0;
    std::uint64_t fp_div = 0;
    std::uint64_t fp_exp = 0;
    std::uint64_t fp_sqrt = 0;

    /// Every non-MAC FP operation.
    std::uint64_t minor_ops() const { return fp_add + fp_sub + fp_mul + fp_div + fp_exp + fp_sqrt; }
    /// A MAC counts as one operation.
    std::uint64_t total() const { return macs + minor_ops(); }

    OpProfile& operator+=(const OpProfile& o) {
        macs += o.macs;
        fp_add += o.fp_add;
        fp_sub += o.fp_sub;
        fp_mul += o.fp_mul;
        fp_div += o.fp_div;
        fp_exp += o.fp_exp;
        fp_sqrt += o.fp_sqrt;
        return *this;
    }
    bool operator==(const OpProfile&) const = default;
};

/// How many output rows a 3x3 kernel streams its weights and input band for.
enum class RowModel {
    /// Vertically valid window positions: floor((I_h - K) / S) + 1.
    /// I_h - 2 for 3x3 stride 1, (I_h - 2) / 2 for 3x3 stride 2, I_h for 1x1.
    windowed,
    /// I_h - 2 for every 3x3 layer regardless of stride.
    literal,
};

/// Which bucket re-reads of produced feature maps (shortcut, route) fall in.
enum class Bucketing {
    /// Every feature-map read is an input read; outputs are the writes.
    reads_as_inputs,
    /// Shortcut: preceding map is an input read, the `from` map an output read.
    /// Route: all reads are output reads.
    shortcut_split,
};

struct TrafficOptions {
    RowModel rows = RowModel::windowed;
    Bucketing bucketing = Bucketing::reads_as_inputs;
    /// Accept any (kernel, stride): weight_reads = params * O_h, input_reads = I_w * K * C * O_h.
    /// Sensitivity option, not the default.
    bool generalized_fallback = false;
};

inline std::uint64_t streamed_rows(const LayerSpec& layer, RowModel model) {
    const auto& conv = layer.conv();
    const int ih = layer.in_shape.h;
    if (conv.kernel == 1) return static_cast<std::uint64_t>(ih);
    if (model == RowModel::literal) return static_cast<std::uint64_t>(ih - 2);
    const int rows = (ih - conv.kernel) / conv.stride + 1;
    return rows > 0 ? static_cast<std::uint64_t>(rows) : 0;
}

inline AccessProfile conv_accesses(const LayerSpec& layer, const TrafficOptions& opts = {}) {
    if (!layer.is_conv()) throw ArgumentError("conv_accesses called on a non-convolutional layer");
    const auto& conv = layer.conv();
    const std::uint64_t ww = conv.kernel, wh = conv.kernel;
    const std::uint64_t wc = layer.in_shape.c, wf = conv.filters;
    const std::uint64_t iw = layer.in_shape.w;

    AccessProfile p;
    p.output_writes = layer.out_shape.elements();

    const bool k3s1 = conv.kernel == 3 && conv.stride == 1;
    const bool k3s2 = conv.kernel == 3 && conv.stride == 2;
    const bool k1s1 = conv.kernel == 1 && conv.stride == 1;
    if (k3s1 || k3s2 || k1s1) {
        const std::uint64_t rows = streamed_rows(layer, opts.rows);
        p.weight_reads = ww * wh * wc * wf * rows;
        p.input_reads = (k3s2 ? iw + 1 : iw) * wh * wc * rows;
        return p;
    }
    if (!opts.generalized_fallback)
        throw UnsupportedLayerError("no access formula for a " + std::to_string(conv.kernel) + "x" +
                                    std::to_string(conv.kernel) + " stride " +
                                    std::to_string(conv.stride) + " convolution");
    const std::uint64_t oh = layer.out_shape.h;
    p.weight_reads = ww * wh * wc * wf * oh;
    p.input_reads = iw * wh * wc * oh;
    return p;
}

/// Accesses of a shortcut, route, upsample or yolo layer. Needs the network
/// to look up the shapes of source layers.
inline AccessProfile other_layer_accesses(const NetworkDef& net, std::size_t index,
                                          const TrafficOptions& opts = {}) {
    const auto& layer = net.layers.at(index);
    const std::uint64_t in = layer.in_shape.elements();
    const bool split = opts.bucketing == Bucketing::shortcut_split;
    AccessProfile p;

    if (const auto* sc = std::get_if<ShortcutSpec>(&layer.kind)) {
        const std::uint64_t other = net.layers[sc->from].out_shape.elements();
        p.input_reads = split ? in : in + other;
        p.output_reads = split ? other : 0;
        p.output_writes = in + other;
    } else if (const auto* route = std::get_if<RouteSpec>(&layer.kind)) {
        std::uint64_t sum = 0;
        for (int src : route->sources) sum += net.layers[src].out_shape.elements();
        (split ? p.output_reads : p.input_reads) = sum;
        p.output_writes = sum;
    } else if (std::holds_alternative<UpsampleSpec>(layer.kind)) {
        p.input_reads = in;
        p.output_writes = 4 * in;
    } else if (std::holds_alternative<YoloSpec>(layer.kind)) {
        p.input_reads = in;
        p.output_writes = in;
    } else {
        throw ArgumentError("other_layer_accesses called on a convolutional layer");
    }
    return p;
}

inline AccessProfile layer_accesses(const NetworkDef& net, std::size_t index,
                                    const TrafficOptions& opts = {}) {
    const auto& layer = net.layers.at(index);
    return layer.is_conv() ? conv_accesses(layer, opts) : other_layer_accesses(net, index, opts);
}

inline std::uint64_t conv_macs(const LayerSpec& layer) {
    const auto& conv = layer.conv();
    return static_cast<std::uint64_t>(layer.out_shape.w) * layer.out_shape.h * conv.kernel *
           conv.kernel * static_cast<std::uint64_t>(layer.in_shape.c) * conv.filters;
}

/// FP operations of one layer. Batch norm is folded offline and costs nothing.
inline OpProfile layer_ops(const NetworkDef& net, std::size_t index) {
    const auto& layer = net.layers.at(index);
    const std::uint64_t out = layer.out_shape.elements();
    OpProfile ops;
    if (layer.is_conv()) {
        ops.macs = conv_macs(layer);
        if (layer.conv().activation == Activation::leaky) {
            ops.fp_sub = out;  // sign test
            ops.fp_mul = out;
        }
    } else if (std::holds_alternative<ShortcutSpec>(layer.kind)) {
        ops.fp_add = out;
    } else if (const auto* yolo = std::get_if<YoloSpec>(&layer.kind)) {
        // Per anchor: x, y, objectness and class scores go through the logistic
        // (exp + add + div); w, h through exp followed by an anchor multiply.
        const std::uint64_t per_anchor = static_cast<std::uint64_t>(yolo->classes) + 5;
        const std::uint64_t cells = static_cast<std::uint64_t>(layer.out_shape.h) * layer.out_shape.w;
        const std::uint64_t anchors = layer.out_shape.c / per_anchor;
        const std::uint64_t logistic = cells * anchors * (per_anchor - 2);
        const std::uint64_t box = cells * anchors * 2;
        ops.fp_exp = logistic + box;
        ops.fp_add = logistic;
        ops.fp_div = logistic;
        ops.fp_mul = box;
    }
    return ops;
}

inline OpProfile op_profile(const NetworkDef& net) {
    OpProfile total;
    for (std::size_t i = 0; i < net.layers.size(); ++i) total += layer_ops(net, i);
    return total;
}

struct TrafficSummary {
    std::vector<AccessProfile> per_layer;
    AccessProfile total;
};

inline TrafficSummary aggregate(const NetworkDef& net, const TrafficOptions& opts = {}) {
    TrafficSummary s;
    s.per_layer.reserve(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        s.per_layer.push_back(layer_accesses(net, i, opts));
        s.total += s.per_layer.back();
    }
    return s;
}

/// Kernel weights across all convolutional layers (the clustered parameters).
inline std::uint64_t total_conv_weights(const NetworkDef& net) {
    std::uint64_t n = 0;
    for (const auto& layer : net.layers)
        if (layer.is_conv()) n += conv_weight_count(layer);
    return n;
}

}  // namespace wclust
