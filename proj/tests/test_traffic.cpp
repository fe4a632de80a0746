#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace wclust;

namespace {

LayerSpec make_conv(int h, int w, int c, int filters, int kernel, int stride, int pad) {
    NetworkDef net;
    net.input = {h, w, c};
    LayerSpec l;
    l.kind = ConvSpec{filters, kernel, stride, pad, false, Activation::linear};
    net.layers.push_back(l);
    return infer_shapes(net).layers[0];
}

}  // namespace

TEST(Traffic, TinyNetworkHandCounts) {
    const auto net = oracle::load_data_net("tiny.cfg");
    const auto p = conv_accesses(net.layers[0]);
    // 3x3 s1 on 8x8x3 -> 4 filters: 6 streamed rows
    EXPECT_EQ(p.weight_reads, 9u * 3 * 4 * 6);
    EXPECT_EQ(p.input_reads, 8u * 3 * 3 * 6);
    EXPECT_EQ(p.output_reads, 0u);
    EXPECT_EQ(p.output_writes, 8u * 8 * 4);
    const auto ops = op_profile(net);
    EXPECT_EQ(ops.macs, 8u * 8 * 9 * 3 * 4);
    EXPECT_EQ(ops.fp_sub, 256u);
    EXPECT_EQ(ops.fp_mul, 256u);
}

TEST(Traffic, FormulasMatchEnumeration) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(3, 24), ch(1, 9);
    const int shapes[3][2] = {{3, 1}, {3, 2}, {1, 1}};
    for (int trial = 0; trial < 200; ++trial) {
        for (const auto& ks : shapes) {
            const int k = ks[0], s = ks[1];
            const auto layer = make_conv(dim(rng), dim(rng), ch(rng), ch(rng), k, s, k / 2);
            for (auto rows : {RowModel::windowed, RowModel::literal})
                EXPECT_EQ(conv_accesses(layer, {rows, Bucketing::reads_as_inputs, false}),
                          oracle::enumerate_conv(layer, rows));
        }
    }
}

TEST(Traffic, StreamedRows) {
    EXPECT_EQ(streamed_rows(make_conv(608, 608, 3, 32, 3, 1, 1), RowModel::windowed), 606u);
    EXPECT_EQ(streamed_rows(make_conv(608, 608, 32, 64, 3, 2, 1), RowModel::windowed), 303u);
    EXPECT_EQ(streamed_rows(make_conv(608, 608, 32, 64, 3, 2, 1), RowModel::literal), 606u);
    EXPECT_EQ(streamed_rows(make_conv(19, 19, 1024, 512, 1, 1, 0), RowModel::windowed), 19u);
}

TEST(Traffic, Stride2CountsPadColumn) {
    const auto p = conv_accesses(make_conv(10, 10, 2, 3, 3, 2, 1));
    EXPECT_EQ(p.input_reads, 11u * 3 * 2 * 4);
}

TEST(Traffic, UnsupportedKernelNeedsFallback) {
    const auto l = make_conv(16, 16, 4, 8, 5, 1, 2);
    EXPECT_THROW(conv_accesses(l), UnsupportedLayerError);
    TrafficOptions opts;
    opts.generalized_fallback = true;
    const auto p = conv_accesses(l, opts);
    EXPECT_EQ(p.weight_reads, 25u * 4 * 8 * 16);
    EXPECT_EQ(p.input_reads, 16u * 5 * 4 * 16);
    EXPECT_THROW(conv_accesses(make_conv(16, 16, 4, 8, 1, 2, 0)), UnsupportedLayerError);
}

TEST(Traffic, NonConvLayers) {
    const auto net = oracle::load_data_net("toy.cfg");
    // shortcut at 4: two 8x8x16 maps
    const auto sc = layer_accesses(net, 4);
    EXPECT_EQ(sc.input_reads, 2048u);
    EXPECT_EQ(sc.output_reads, 0u);
    EXPECT_EQ(sc.output_writes, 2048u);
    TrafficOptions split;
    split.bucketing = Bucketing::shortcut_split;
    const auto sc2 = layer_accesses(net, 4, split);
    EXPECT_EQ(sc2.input_reads, 1024u);
    EXPECT_EQ(sc2.output_reads, 1024u);
    EXPECT_EQ(sc2.output_writes, 2048u);
    // route -1, 0 at 11: 16x16x8 twice
    EXPECT_EQ(layer_accesses(net, 11).input_reads, 4096u);
    EXPECT_EQ(layer_accesses(net, 11, split).output_reads, 4096u);
    EXPECT_EQ(layer_accesses(net, 11).output_writes, 4096u);
    // upsample at 10 reads 8x8x8, writes 4x that
    EXPECT_EQ(layer_accesses(net, 10), (AccessProfile{0, 512, 0, 2048}));
    // yolo at 7 passes 4x4x21 through
    EXPECT_EQ(layer_accesses(net, 7), (AccessProfile{0, 336, 0, 336}));
}

TEST(Traffic, AggregateSumsLayers) {
    const auto net = oracle::load_data_net("toy.cfg");
    const auto s = aggregate(net);
    AccessProfile sum;
    for (std::size_t i = 0; i < net.layers.size(); ++i) sum += layer_accesses(net, i);
    EXPECT_EQ(s.total, sum);
    EXPECT_EQ(s.per_layer.size(), net.layers.size());
}

TEST(Traffic, YoloV3Census) {
    const auto net = oracle::load_data_net("yolov3.cfg");
    const auto ops = op_profile(net);
    std::uint64_t macs = 0;
    for (std::size_t i : conv_layer_indices(net)) macs += conv_macs(net.layers[i]);
    EXPECT_EQ(ops.macs, macs);
    EXPECT_GE(static_cast<double>(ops.macs) / static_cast<double>(ops.total()), 0.99);
    // weights stream from DRAM: every kernel weight is read once per streamed row
    const auto t = aggregate(net).total;
    EXPECT_GT(t.weight_reads, total_conv_weights(net));
}

TEST(Traffic, YoloHeadOps) {
    const auto net = oracle::load_data_net("toy.cfg");
    const auto ops = layer_ops(net, 7);
    const std::uint64_t cells = 16, anchors = 3;
    EXPECT_EQ(ops.fp_exp, cells * anchors * 7);
    EXPECT_EQ(ops.fp_div, cells * anchors * 5);
    EXPECT_EQ(ops.fp_add, cells * anchors * 5);
    EXPECT_EQ(ops.fp_mul, cells * anchors * 2);
    EXPECT_EQ(layer_ops(net, 4).fp_add, 1024u);
}
