#pragma once

// Post-training weight clustering: 1-D k-means codebooks, word-aligned
// bit-packed index streams, and dequantization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "wclust/error.hpp"
#include "wclust/scope.hpp"

namespace wclust {

enum class Init { linspace, kmeans_pp };

struct ClusterConfig {
    Scope scope = Scope::per_layer;
    int bits = 8;  // K = 2^bits clusters
    int max_iters = 300;
    double tol = 1e-6;  // on the largest centroid movement
    std::uint64_t seed = 0;
    Init init = Init::linspace;

    std::size_t clusters() const { return std::size_t{1} << bits; }
    void validate() const {
        if (bits < 1 || bits > 16) throw ArgumentError("cluster bits must lie in 1..16");
        if (max_iters < 1) throw ArgumentError("max_iters must be at least 1");
        if (!(tol >= 0.0)) throw ArgumentError("tol must be non-negative");
    }
};

/// Codebook of 32-bit floats, sorted ascending.
struct CentroidTable {
    std::vector<float> centroids;
    std::size_t size() const { return centroids.size(); }
    bool operator==(const CentroidTable&) const = default;
};

/// Indices packed floor(32/bits) per 32-bit word, little-endian within the word.
/// No index straddles two words and unused high bits are zero.
struct PackedIndices {
    int bits = 8;
    std::uint64_t count = 0;
    std::vector<std::uint32_t> words;

    int per_word() const { return 32 / bits; }
    std::uint32_t mask() const { return bits == 32 ? 0xFFFFFFFFu : (1u << bits) - 1u; }

    std::uint32_t operator[](std::uint64_t j) const {
        const auto f = static_cast<std::uint64_t>(per_word());
        return (words[j / f] >> ((j % f) * static_cast<std::uint64_t>(bits))) & mask();
    }
    bool operator==(const PackedIndices&) const = default;
};

inline std::uint64_t packed_word_count(std::uint64_t count, int bits) {
    const auto f = static_cast<std::uint64_t>(32 / bits);
    return (count + f - 1) / f;
}

inline PackedIndices pack_indices(std::span<const std::uint32_t> indices, int bits) {
    if (bits < 1 || bits > 32) throw ArgumentError("index width must lie in 1..32");
    PackedIndices p;
    p.bits = bits;
    p.count = indices.size();
    p.words.assign(packed_word_count(p.count, bits), 0u);
    const auto f = static_cast<std::uint64_t>(p.per_word());
    const std::uint32_t mask = p.mask();
    for (std::uint64_t j = 0; j < p.count; ++j) {
        if (indices[j] & ~mask)
            throw ArgumentError("index " + std::to_string(indices[j]) + " does not fit in " +
                                std::to_string(bits) + " bits");
        p.words[j / f] |= indices[j] << ((j % f) * static_cast<std::uint64_t>(bits));
    }
    return p;
}

inline std::vector<std::uint32_t> unpack_indices(const PackedIndices& p) {
    std::vector<std::uint32_t> out(p.count);
    for (std::uint64_t j = 0; j < p.count; ++j) out[j] = p[j];
    return out;
}

/// Replaces each index by its centroid.
inline std::vector<float> dequantize(const CentroidTable& table, const PackedIndices& packed) {
    std::vector<float> out(packed.count);
    for (std::uint64_t j = 0; j < packed.count; ++j) {
        const auto idx = packed[j];
        if (idx >= table.size())
            throw ArgumentError("index " + std::to_string(idx) + " exceeds table of " +
                                std::to_string(table.size()) + " centroids");
        out[j] = table.centroids[idx];
    }
    return out;
}

namespace detail {

/// Neumaier-compensated sum; pins k-means results across platforms.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0;
    double comp_ = 0;
};

/// Index of the nearest entry of an ascending `centroids`; ties go to the lower index.
template <class T>
std::size_t nearest(std::span<const T> centroids, double x) {
    const auto it = std::lower_bound(centroids.begin(), centroids.end(), x,
                                     [](T c, double v) { return static_cast<double>(c) < v; });
    std::size_t j = static_cast<std::size_t>(it - centroids.begin());
    if (j == centroids.size()) {
        j = centroids.size() - 1;
    } else if (j > 0 && x - static_cast<double>(centroids[j - 1]) <= static_cast<double>(centroids[j]) - x) {
        j = j - 1;
    }
    // First of any run of equal centroids.
    const T v = centroids[j];
    while (j > 0 && centroids[j - 1] == v) --j;
    return j;
}

/// Uniform double in [0, 1) from the raw engine output, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<double> init_centroids(std::span<const double> x, std::size_t k, const ClusterConfig& cfg) {
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> c(k);
    if (cfg.init == Init::linspace) {
        if (k == 1) {
            c[0] = lo + (hi - lo) * 0.5;
        } else {
            for (std::size_t j = 0; j < k; ++j)
                c[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(k - 1);
        }
        return c;
    }
    // k-means++ seeding.
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> d2(x.size(), std::numeric_limits<double>::infinity());
    c[0] = x[std::min<std::size_t>(x.size() - 1, static_cast<std::size_t>(unit_uniform(rng) * x.size()))];
    for (std::size_t j = 1; j < k; ++j) {
        CompensatedSum total;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - c[j - 1];
            d2[i] = std::min(d2[i], d * d);
            total.add(d2[i]);
        }
        const double target = unit_uniform(rng) * total.value();
        double acc = 0;
        std::size_t pick = x.size() - 1;
        for (std::size_t i = 0; i < x.size(); ++i) {
            acc += d2[i];
            if (acc > target) {
                pick = i;
                break;
            }
        }
        c[j] = x[pick];
    }
    std::sort(c.begin(), c.end());
    return c;
}

}  // namespace detail

struct KMeansResult {
    CentroidTable table;
    std::vector<std::uint32_t> assignments;
    double sse = 0;                    // with the final float centroids
    std::vector<double> sse_history;   // after each centroid update
    int iterations = 0;
    bool converged = false;
};

/// Lloyd's algorithm in one dimension. Empty clusters are re-seeded at the
/// value farthest from its centroid. When there are at most K distinct values
/// the table holds exactly those values and the error is zero.
inline KMeansResult kmeans_1d(std::span<const float> values, std::size_t k, const ClusterConfig& cfg = {}) {
    if (k < 1) throw ArgumentError("k-means needs at least one cluster");
    if (values.empty()) throw ArgumentError("k-means needs at least one value");
    if (cfg.max_iters < 1) throw ArgumentError("max_iters must be at least 1");
    for (float v : values)
        if (!std::isfinite(v)) throw ArgumentError("k-means input contains a non-finite value");

    KMeansResult r;
    std::vector<float> distinct(values.begin(), values.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    if (distinct.size() <= k) {
        r.table.centroids = distinct;
        r.assignments.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            r.assignments[i] = static_cast<std::uint32_t>(detail::nearest<float>(distinct, values[i]));
        r.sse_history.push_back(0.0);
        r.converged = true;
        return r;
    }

    const std::vector<double> x(values.begin(), values.end());
    std::vector<double> c = detail::init_centroids(x, k, cfg);
    std::vector<std::uint32_t> assign(x.size());
    std::vector<detail::CompensatedSum> sums(k);
    std::vector<std::size_t> counts(k);

    for (int it = 0; it < cfg.max_iters; ++it) {
        for (std::size_t i = 0; i < x.size(); ++i)
            assign[i] = static_cast<std::uint32_t>(detail::nearest<double>(c, x[i]));

        std::fill(sums.begin(), sums.end(), detail::CompensatedSum{});
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            sums[assign[i]].add(x[i]);
            ++counts[assign[i]];
        }
        std::vector<double> next = c;
        for (std::size_t j = 0; j < k; ++j)
            if (counts[j]) next[j] = sums[j].value() / static_cast<double>(counts[j]);

        std::vector<double> dist(x.size());
        detail::CompensatedSum sse;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - next[assign[i]];
            dist[i] = d * d;
            sse.add(dist[i]);
        }
        r.sse_history.push_back(sse.value());

        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j]) continue;
            const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
            next[j] = x[far];
            dist[far] = -1.0;  // not picked twice
        }
        std::sort(next.begin(), next.end());

        double movement = 0;
        for (std::size_t j = 0; j < k; ++j) movement = std::max(movement, std::abs(next[j] - c[j]));
        c = std::move(next);
        r.iterations = it + 1;
        if (movement <= cfg.tol) {
            r.converged = true;
            break;
        }
    }

    r.table.centroids.assign(c.begin(), c.end());
    std::sort(r.table.centroids.begin(), r.table.centroids.end());
    r.assignments.resize(values.size());
    detail::CompensatedSum sse;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto j = detail::nearest<float>(r.table.centroids, values[i]);
        r.assignments[i] = static_cast<std::uint32_t>(j);
        const double d = static_cast<double>(values[i]) - static_cast<double>(r.table.centroids[j]);
        sse.add(d * d);
    }
    r.sse = sse.value();
    return r;
}

/// Sum of squared reconstruction errors of `values` under `table`/`assignments`.
inline double quantization_sse(std::span<const float> values, const CentroidTable& table,
                               std::span<const std::uint32_t> assignments) {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = static_cast<double>(values[i]) - static_cast<double>(table.centroids[assignments[i]]);
        s.add(d * d);
    }
    return s.value();
}

constexpr std::uint32_t kGlobalTable = 0xFFFFFFFFu;

/// One codebook and the indices of the weights it covers.
struct ClusterTable {
    std::uint32_t layer_id = kGlobalTable;  // network layer index, or kGlobalTable
    CentroidTable table;
    PackedIndices indices;
    bool operator==(const ClusterTable&) const = default;
};

/// Clustered kernel weights of every convolutional layer. Biases and
/// batch-norm parameters are not clustered and live with the source weights.
struct ClusteredModel {
    Scope scope = Scope::per_layer;
    int bits = 8;
    std::vector<ClusterTable> tables;

    std::uint64_t index_count() const {
        std::uint64_t n = 0;
        for (const auto& t : tables) n += t.indices.count;
        return n;
    }
    bool operator==(const ClusteredModel&) const = default;
};

/// Kernel weights of one convolutional layer.
struct LayerWeightsView {
    std::uint32_t layer_id = 0;
    std::span<const float> weights;
};

struct ClusteringRun {
    ClusteredModel model;
    std::vector<double> sse;            // per table
    std::vector<std::uint64_t> counts;  // weights per table
    std::vector<int> iterations;

    double total_sse() const {
        double s = 0;
        for (double v : sse) s += v;
        return s;
    }
};

/// Clusters every layer's kernel weights into one codebook (all_layers) or
/// one per layer (per_layer).
inline ClusteringRun cluster_model(std::span<const LayerWeightsView> layers, const ClusterConfig& cfg) {
    cfg.validate();
    if (layers.empty()) throw ArgumentError("no convolutional weights to cluster");
    const std::size_t k = cfg.clusters();

    ClusteringRun run;
    run.model.scope = cfg.scope;
    run.model.bits = cfg.bits;
    const auto add_table = [&](std::uint32_t id, std::span<const float> w) {
        auto km = kmeans_1d(w, k, cfg);
        if (km.table.size() > k) throw ArgumentError("codebook exceeds 2^bits entries");
        run.model.tables.push_back({id, km.table, pack_indices(km.assignments, cfg.bits)});
        run.sse.push_back(km.sse);
        run.counts.push_back(w.size());
        run.iterations.push_back(km.iterations);
    };

    if (cfg.scope == Scope::all_layers) {
        std::vector<float> all;
        for (const auto& l : layers) all.insert(all.end(), l.weights.begin(), l.weights.end());
        add_table(kGlobalTable, all);
    } else {
        for (const auto& l : layers) add_table(l.layer_id, l.weights);
    }
    return run;
}

}  // namespace wclust
