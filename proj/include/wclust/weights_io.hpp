#pragma once

// Darknet `.weights` reader/writer and the CWTS clustered-weights container.
//
// CWTS layout, little-endian:
//   "CWTS" | u16 version=1 | u8 scope | u8 bits | u32 table_count
//   per table: u32 layer_id (0xFFFFFFFF = all layers) | u32 K | K x f32
//              | u64 index_count | ceil(index_count / floor(32/bits)) x u32
//   u32 CRC-32 of every preceding byte

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "wclust/cluster.hpp"
#include "wclust/error.hpp"
#include "wclust/netdef.hpp"

namespace wclust {

inline std::uint32_t crc32_of(std::span<const std::byte> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    constexpr std::size_t chunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += chunk) {
        const auto n = std::min(chunk, bytes.size() - off);
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::byte> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    in.seekg(0, std::ios::end);
    std::vector<std::byte> bytes(static_cast<std::size_t>(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw Error("cannot read '" + path + "'");
    return bytes;
}

inline void write_file(const std::string& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write '" + path + "'");
}

namespace detail {

class ByteWriter {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_unsigned_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
    }
    void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void put_i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
    void put_raw(std::string_view s) {
        for (char ch : s) bytes_.push_back(static_cast<std::byte>(ch));
    }
    std::vector<std::byte>& bytes() { return bytes_; }

private:
    std::vector<std::byte> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    template <class T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(std::to_integer<unsigned>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
    std::int32_t get_i32(const char* what) { return static_cast<std::int32_t>(get<std::uint32_t>(what)); }

    void get_f32s(std::vector<float>& out, std::size_t n, const char* what) {
        need(n * 4, what);
        out.resize(n);
        for (auto& v : out) v = get_f32(what);
    }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated input while reading ") + what, pos_);
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parameters of one convolutional layer in Darknet order.
struct ConvParams {
    std::vector<float> biases;
    std::vector<float> scales;  // batch-norm only
    std::vector<float> rolling_mean;
    std::vector<float> rolling_variance;
    std::vector<float> weights;  // filters x channels x k x k
    bool operator==(const ConvParams&) const = default;
};

struct DarknetWeights {
    std::array<std::int32_t, 5> header{0, 2, 0, 0, 0};
    std::vector<std::size_t> layer_index;  // network layer of each entry
    std::vector<ConvParams> layers;        // one per convolutional layer
    bool operator==(const DarknetWeights&) const = default;

    std::vector<LayerWeightsView> kernel_views() const {
        std::vector<LayerWeightsView> v;
        for (std::size_t i = 0; i < layers.size(); ++i)
            v.push_back({static_cast<std::uint32_t>(layer_index[i]), layers[i].weights});
        return v;
    }
};

/// Header of five little-endian int32, then per conv layer: biases[f];
/// if batch_normalize: scales[f], rolling_mean[f], rolling_var[f];
/// then kernel weights[f*c*k*k], all little-endian float32.
inline DarknetWeights read_darknet_weights(std::span<const std::byte> bytes, const NetworkDef& net) {
    detail::ByteReader in(bytes);
    DarknetWeights w;
    for (auto& h : w.header) h = in.get_i32("header");
    for (std::size_t i : conv_layer_indices(net)) {
        const auto& layer = net.layers[i];
        const auto f = static_cast<std::size_t>(layer.conv().filters);
        ConvParams p;
        in.get_f32s(p.biases, f, "biases");
        if (layer.conv().batch_normalize) {
            in.get_f32s(p.scales, f, "batch-norm scales");
            in.get_f32s(p.rolling_mean, f, "batch-norm means");
            in.get_f32s(p.rolling_variance, f, "batch-norm variances");
        }
        in.get_f32s(p.weights, conv_weight_count(layer), "kernel weights");
        w.layer_index.push_back(i);
        w.layers.push_back(std::move(p));
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes after the last layer", in.pos());
    return w;
}

inline std::vector<std::byte> write_darknet_weights(const DarknetWeights& w) {
    detail::ByteWriter out;
    for (auto h : w.header) out.put_i32(h);
    for (const auto& p : w.layers)
        for (const auto* v : {&p.biases, &p.scales, &p.rolling_mean, &p.rolling_variance, &p.weights})
            for (float x : *v) out.put_f32(x);
    return std::move(out.bytes());
}

inline constexpr std::string_view kCwtsMagic = "CWTS";
inline constexpr std::uint16_t kCwtsVersion = 1;

inline std::vector<std::byte> write_clustered(const ClusteredModel& model) {
    detail::ByteWriter out;
    out.put_raw(kCwtsMagic);
    out.put(kCwtsVersion);
    out.put(static_cast<std::uint8_t>(model.scope));
    out.put(static_cast<std::uint8_t>(model.bits));
    out.put(static_cast<std::uint32_t>(model.tables.size()));
    for (const auto& t : model.tables) {
        if (t.indices.bits != model.bits) throw ArgumentError("table index width differs from model width");
        out.put(t.layer_id);
        out.put(static_cast<std::uint32_t>(t.table.size()));
        for (float c : t.table.centroids) out.put_f32(c);
        out.put(static_cast<std::uint64_t>(t.indices.count));
        for (auto word : t.indices.words) out.put(word);
    }
    auto& bytes = out.bytes();
    const auto crc = crc32_of(bytes);
    out.put(crc);
    return std::move(bytes);
}

inline ClusteredModel read_clustered(std::span<const std::byte> bytes) {
    if (bytes.size() < 16) throw FormatError("truncated CWTS file", bytes.size());
    const auto body = bytes.first(bytes.size() - 4);
    detail::ByteReader tail(bytes.subspan(bytes.size() - 4));
    if (tail.get<std::uint32_t>("CRC") != crc32_of(body))
        throw FormatError("CRC mismatch in CWTS file", bytes.size() - 4);

    detail::ByteReader in(body);
    for (char ch : kCwtsMagic)
        if (static_cast<char>(in.get<std::uint8_t>("magic")) != ch) throw FormatError("bad CWTS magic", 0);
    if (in.get<std::uint16_t>("version") != kCwtsVersion) throw FormatError("unsupported CWTS version", 4);

    ClusteredModel m;
    const auto scope = in.get<std::uint8_t>("scope");
    if (scope > 1) throw FormatError("bad scope byte", in.pos() - 1);
    m.scope = static_cast<Scope>(scope);
    m.bits = in.get<std::uint8_t>("bits");
    if (m.bits < 1 || m.bits > 16) throw FormatError("bad index width", in.pos() - 1);
    const auto n_tables = in.get<std::uint32_t>("table count");
    if (m.scope == Scope::all_layers && n_tables != 1)
        throw FormatError("all-layers CWTS file must hold exactly one table", in.pos() - 4);

    for (std::uint32_t t = 0; t < n_tables; ++t) {
        ClusterTable table;
        table.layer_id = in.get<std::uint32_t>("layer id");
        if ((m.scope == Scope::all_layers) != (table.layer_id == kGlobalTable))
            throw FormatError("layer id inconsistent with scope", in.pos() - 4);
        const auto k = in.get<std::uint32_t>("table size");
        if (k == 0 || k > (1u << m.bits)) throw FormatError("table size exceeds 2^bits", in.pos() - 4);
        in.get_f32s(table.table.centroids, k, "centroids");
        table.indices.bits = m.bits;
        table.indices.count = in.get<std::uint64_t>("index count");
        const auto n_words = packed_word_count(table.indices.count, m.bits);
        if (n_words > in.remaining() / 4) throw FormatError("truncated index stream", in.pos());
        const auto stream_start = in.pos();
        table.indices.words.resize(n_words);
        for (auto& word : table.indices.words) word = in.get<std::uint32_t>("index stream");

        const auto per_word = static_cast<std::uint64_t>(table.indices.per_word());
        const auto used_bits = static_cast<unsigned>(per_word * static_cast<std::uint64_t>(m.bits));
        for (std::size_t w = 0; w < n_words; ++w)
            if (used_bits < 32 && (table.indices.words[w] >> used_bits) != 0)
                throw FormatError("non-zero padding bits in index word", stream_start + 4 * w);
        for (std::uint64_t j = 0; j < table.indices.count; ++j)
            if (table.indices[j] >= k)
                throw FormatError("index " + std::to_string(table.indices[j]) + " overflows table of " +
                                      std::to_string(k),
                                  stream_start + 4 * (j / per_word));
        m.tables.push_back(std::move(table));
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes before CRC", in.pos());
    return m;
}

/// Dense kernel weights of each conv layer, reconstructed from the codebooks.
/// Entries follow `weights.layer_index` order.
inline std::vector<std::vector<float>> dequantize_model(const ClusteredModel& model, const DarknetWeights& weights) {
    std::vector<std::vector<float>> out;
    if (model.scope == Scope::all_layers) {
        if (model.tables.size() != 1) throw ArgumentError("all-layers model must have one table");
        const auto all = dequantize(model.tables[0].table, model.tables[0].indices);
        std::size_t offset = 0;
        for (const auto& p : weights.layers) {
            if (offset + p.weights.size() > all.size()) throw ArgumentError("clustered model has too few indices");
            out.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(offset),
                             all.begin() + static_cast<std::ptrdiff_t>(offset + p.weights.size()));
            offset += p.weights.size();
        }
        if (offset != all.size()) throw ArgumentError("clustered model index count differs from the network");
        return out;
    }
    if (model.tables.size() != weights.layers.size())
        throw ArgumentError("per-layer model table count differs from the network's conv layers");
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        const auto& t = model.tables[i];
        if (t.layer_id != weights.layer_index[i] || t.indices.count != weights.layers[i].weights.size())
            throw ArgumentError("table " + std::to_string(i) + " does not match conv layer " +
                                std::to_string(weights.layer_index[i]));
        out.push_back(dequantize(t.table, t.indices));
    }
    return out;
}

}  // namespace wclust
