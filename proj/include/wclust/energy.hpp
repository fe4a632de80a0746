#pragma once

// Energy, bandwidth and FPS model. All constants come from an EnergyConfig,
// normally loaded from a flat key=value file (see data/energy_default.cfg).

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "wclust/error.hpp"
#include "wclust/netdef.hpp"
#include "wclust/scope.hpp"
#include "wclust/traffic.hpp"

namespace wclust {

struct EnergyConfig {
    // DRAM energy per bus-width access, pJ.
    double dram_read_miss_pJ = 0;
    double dram_read_hit_pJ = 0;
    double dram_write_miss_pJ = 0;
    double dram_write_hit_pJ = 0;
    double row_miss_ratio = 0;
    int bus_width_bits = 64;
    int word_bits = 32;
    /// Centroid-table read energy per 32-bit read, keyed by index width.
    std::map<int, double> sram_read_pJ;
    double fp_add_pJ = 0;
    double fp_mul_pJ = 0;
    std::optional<double> fp_mac_pJ;  // add + mul when absent
    std::optional<double> fp_sub_pJ;  // sub/div/exp/sqrt default to the mul energy
    std::optional<double> fp_div_pJ;
    std::optional<double> fp_exp_pJ;
    std::optional<double> fp_sqrt_pJ;
    double dram_peak_GBps = 0;
    double target_fps = 0;
    // Targets the FP energies are calibrated against.
    std::optional<double> calib_total_mJ;
    std::optional<double> calib_dram_share;

    double mac_pJ() const { return fp_mac_pJ.value_or(fp_add_pJ + fp_mul_pJ); }
    double sub_pJ() const { return fp_sub_pJ.value_or(fp_mul_pJ); }
    double div_pJ() const { return fp_div_pJ.value_or(fp_mul_pJ); }
    double exp_pJ() const { return fp_exp_pJ.value_or(fp_mul_pJ); }
    double sqrt_pJ() const { return fp_sqrt_pJ.value_or(fp_mul_pJ); }

    double sram_read_energy(int bits) const {
        auto it = sram_read_pJ.find(bits);
        if (it == sram_read_pJ.end())
            throw ConfigError("no SRAM read energy configured for " + std::to_string(bits) + "-bit clustering");
        return it->second;
    }

    void validate() const {
        if (!(row_miss_ratio > 0.0 && row_miss_ratio <= 1.0))
            throw ConfigError("row_miss_ratio must lie in (0, 1]");
        for (double e : {dram_read_miss_pJ, dram_read_hit_pJ, dram_write_miss_pJ, dram_write_hit_pJ,
                         fp_add_pJ, fp_mul_pJ, dram_peak_GBps, target_fps})
            if (!(e > 0.0)) throw ConfigError("energies, peak bandwidth and target FPS must be positive");
        for (const auto& opt : {fp_mac_pJ, fp_sub_pJ, fp_div_pJ, fp_exp_pJ, fp_sqrt_pJ})
            if (opt && !(*opt > 0.0)) throw ConfigError("FP energies must be positive");
        for (const auto& [bits, e] : sram_read_pJ)
            if (!(e > 0.0)) throw ConfigError("SRAM read energies must be positive");
        if (word_bits <= 0 || bus_width_bits <= 0 || bus_width_bits % word_bits != 0)
            throw ConfigError("bus_width_bits must be a positive multiple of word_bits");
    }

    static EnergyConfig parse(std::string_view text);
    std::string serialize() const;
};

namespace detail {

inline double parse_number(std::string_view text, std::size_t line) {
    text = trim(text);
    const auto parse_one = [&](std::string_view s) {
        s = trim(s);
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ConfigError("expected a number, got '" + std::string(text) + "'", line);
        return v;
    };
    // Ratios may be written as fractions, e.g. row_miss_ratio=1/64.
    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        const double den = parse_one(text.substr(slash + 1));
        if (den == 0.0) throw ConfigError("zero denominator", line);
        return parse_one(text.substr(0, slash)) / den;
    }
    return parse_one(text);
}

inline std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

inline EnergyConfig EnergyConfig::parse(std::string_view text) {
    EnergyConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key=value", line_no);
        const auto key = detail::trim(line.substr(0, eq));
        const double v = detail::parse_number(line.substr(eq + 1), line_no);

        if (key == "dram_read_miss_pJ") cfg.dram_read_miss_pJ = v;
        else if (key == "dram_read_hit_pJ") cfg.dram_read_hit_pJ = v;
        else if (key == "dram_write_miss_pJ") cfg.dram_write_miss_pJ = v;
        else if (key == "dram_write_hit_pJ") cfg.dram_write_hit_pJ = v;
        else if (key == "row_miss_ratio") cfg.row_miss_ratio = v;
        else if (key == "bus_width_bits") cfg.bus_width_bits = static_cast<int>(v);
        else if (key == "word_bits") cfg.word_bits = static_cast<int>(v);
        else if (key == "fp_add_pJ") cfg.fp_add_pJ = v;
        else if (key == "fp_mul_pJ") cfg.fp_mul_pJ = v;
        else if (key == "fp_mac_pJ") cfg.fp_mac_pJ = v;
        else if (key == "fp_sub_pJ") cfg.fp_sub_pJ = v;
        else if (key == "fp_div_pJ") cfg.fp_div_pJ = v;
        else if (key == "fp_exp_pJ") cfg.fp_exp_pJ = v;
        else if (key == "fp_sqrt_pJ") cfg.fp_sqrt_pJ = v;
        else if (key == "dram_peak_GBps") cfg.dram_peak_GBps = v;
        else if (key == "target_fps") cfg.target_fps = v;
        else if (key == "calib_total_mJ") cfg.calib_total_mJ = v;
        else if (key == "calib_dram_share") cfg.calib_dram_share = v;
        else if (key.starts_with("sram_read_pJ_")) {
            int bits = 0;
            const auto suffix = key.substr(13);
            auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), bits);
            if (ec != std::errc() || ptr != suffix.data() + suffix.size())
                throw ConfigError("bad SRAM key '" + std::string(key) + "'", line_no);
            cfg.sram_read_pJ[bits] = v;
        } else {
            throw ConfigError("unknown energy config key '" + std::string(key) + "'", line_no);
        }
    }
    cfg.validate();
    return cfg;
}

inline std::string EnergyConfig::serialize() const {
    using detail::format_number;
    std::ostringstream os;
    const auto put = [&](const char* key, double v) { os << key << "=" << format_number(v) << "\n"; };
    const auto put_opt = [&](const char* key, const std::optional<double>& v) {
        if (v) put(key, *v);
    };
    os << "# DRAM energy per " << bus_width_bits << "-bit access (pJ)\n";
    put("dram_read_miss_pJ", dram_read_miss_pJ);
    put("dram_read_hit_pJ", dram_read_hit_pJ);
    put("dram_write_miss_pJ", dram_write_miss_pJ);
    put("dram_write_hit_pJ", dram_write_hit_pJ);
    put("row_miss_ratio", row_miss_ratio);
    put("bus_width_bits", bus_width_bits);
    put("word_bits", word_bits);
    os << "\n# Centroid-table SRAM read energy per 32-bit read (pJ)\n";
    for (const auto& [bits, e] : sram_read_pJ) put(("sram_read_pJ_" + std::to_string(bits)).c_str(), e);
    os << "\n# FP operation energy (pJ)\n";
    put("fp_add_pJ", fp_add_pJ);
    put("fp_mul_pJ", fp_mul_pJ);
    put_opt("fp_mac_pJ", fp_mac_pJ);
    put_opt("fp_sub_pJ", fp_sub_pJ);
    put_opt("fp_div_pJ", fp_div_pJ);
    put_opt("fp_exp_pJ", fp_exp_pJ);
    put_opt("fp_sqrt_pJ", fp_sqrt_pJ);
    os << "\n# Throughput\n";
    put("dram_peak_GBps", dram_peak_GBps);
    put("target_fps", target_fps);
    if (calib_total_mJ || calib_dram_share) os << "\n# Calibration targets\n";
    put_opt("calib_total_mJ", calib_total_mJ);
    put_opt("calib_dram_share", calib_dram_share);
    return os.str();
}

/// Row-buffer-weighted average energy of one DRAM access.
inline double avg_dram_energy(double hit_pJ, double miss_pJ, double miss_ratio) {
    if (!(miss_ratio > 0.0 && miss_ratio <= 1.0))
        throw ArgumentError("row miss ratio must lie in (0, 1]");
    return miss_ratio * miss_pJ + (1.0 - miss_ratio) * hit_pJ;
}

struct DramAccesses {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t total() const { return reads + writes; }
    bool operator==(const DramAccesses&) const = default;
};

inline bool supported_weight_bits(int bits) { return bits == 32 || (bits >= 5 && bits <= 8); }

/// Indices that fit in one word without straddling a word boundary.
inline int indices_per_word(int bits, int word_bits = 32) {
    if (bits < 1 || bits > word_bits) throw ArgumentError("index width out of range");
    return word_bits / bits;
}

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Converts element counts to bus-width DRAM accesses. Categories are rounded
/// up independently and never share an access.
inline DramAccesses dram_accesses_from_elements(const AccessProfile& p, int weight_bits,
                                                int bus_width_bits = 64, int word_bits = 32) {
    if (!supported_weight_bits(weight_bits))
        throw ArgumentError("unsupported weight width " + std::to_string(weight_bits) + " bits");
    const std::uint64_t words_per_access = static_cast<std::uint64_t>(bus_width_bits / word_bits);
    const std::uint64_t weights_per_access =
        words_per_access * static_cast<std::uint64_t>(indices_per_word(weight_bits, word_bits));
    DramAccesses a;
    a.reads = ceil_div(p.weight_reads, weights_per_access) + ceil_div(p.input_reads, words_per_access) +
              ceil_div(p.output_reads, words_per_access);
    a.writes = ceil_div(p.output_writes, words_per_access);
    return a;
}

enum class Packing { word_aligned, tight };

struct SizeReduction {
    double factor = 1;
    std::uint64_t original_bits = 0;
    std::uint64_t stored_bits = 0;  // indices plus centroid tables
};

/// Storage of n 32-bit weights as `bits`-wide indices into `tables` codebooks of K entries.
inline SizeReduction size_reduction_factor(int bits, Packing packing, std::uint64_t n_weights,
                                           std::uint64_t k, std::uint64_t tables = 1) {
    if (bits < 1 || bits > 32) throw ArgumentError("bit width must be in 1..32");
    SizeReduction r;
    r.original_bits = 32 * n_weights;
    const std::uint64_t table_bits = 32 * k * tables;
    if (packing == Packing::word_aligned) {
        const auto per_word = static_cast<std::uint64_t>(indices_per_word(bits));
        r.stored_bits = 32 * ceil_div(n_weights, per_word) + table_bits;
        r.factor = static_cast<double>(per_word);
    } else {
        r.stored_bits = n_weights * static_cast<std::uint64_t>(bits) + table_bits;
        r.factor = r.stored_bits ? static_cast<double>(r.original_bits) / r.stored_bits : 0.0;
    }
    return r;
}

/// Bytes of a centroid table with 2^bits 32-bit entries.
inline std::uint64_t sram_table_bytes(int bits) {
    if (bits < 5 || bits > 8) throw ArgumentError("centroid tables are sized for 5..8-bit indices");
    return (std::uint64_t{1} << bits) * 4;
}

struct Clustering {
    int bits = 8;
    Scope scope = Scope::per_layer;
};

/// FP energy of an op census, mJ.
inline double fp_energy_mJ(const OpProfile& ops, const EnergyConfig& cfg) {
    const double pJ = static_cast<double>(ops.macs) * cfg.mac_pJ() +
                      static_cast<double>(ops.fp_add) * cfg.fp_add_pJ +
                      static_cast<double>(ops.fp_mul) * cfg.fp_mul_pJ +
                      static_cast<double>(ops.fp_sub) * cfg.sub_pJ() +
                      static_cast<double>(ops.fp_div) * cfg.div_pJ() +
                      static_cast<double>(ops.fp_exp) * cfg.exp_pJ() +
                      static_cast<double>(ops.fp_sqrt) * cfg.sqrt_pJ();
    return pJ * 1e-9;
}

struct EnergyReport {
    std::string configuration;
    int weight_bits = 32;
    std::optional<Scope> scope;

    AccessProfile elements;             // 32-bit element accesses of the model
    std::uint64_t table_load_reads = 0; // centroid elements fetched from DRAM per frame
    DramAccesses dram;                  // bus-width accesses, table loads included
    std::uint64_t sram_reads = 0;

    double avg_read_pJ = 0;
    double avg_write_pJ = 0;
    double dram_mJ = 0;
    double sram_mJ = 0;
    double fp_mJ = 0;
    double total_mJ = 0;
    double dram_share = 0;
    double sram_share = 0;
    double fp_share = 0;
    double sram_share_of_baseline = 0;

    double weight_access_share = 0;  // of element accesses
    double input_access_share = 0;
    double output_access_share = 0;

    double bytes_per_frame = 0;
    double bandwidth_GBps = 0;       // at target_fps
    double max_fps = 0;              // at the baseline's bandwidth demand
    double max_fps_at_peak = 0;      // at the DRAM peak bandwidth
    double relative_memory = 1;      // (DRAM + SRAM) / baseline DRAM
    double relative_overall = 1;     // total / baseline total

    double sram_read_pJ = 0;
    std::uint64_t sram_table_bytes = 0;
    std::uint64_t tables = 0;
    double size_factor = 1;
};

namespace detail {

struct MemoryEnergy {
    DramAccesses dram;
    std::uint64_t table_loads = 0;
    std::uint64_t tables = 0;
    std::uint64_t sram_reads = 0;
    double dram_mJ = 0;
    double sram_mJ = 0;
};

inline MemoryEnergy memory_energy(const NetworkDef& net, const AccessProfile& elements,
                                  const EnergyConfig& cfg, const std::optional<Clustering>& clustering) {
    MemoryEnergy m;
    const double rd = avg_dram_energy(cfg.dram_read_hit_pJ, cfg.dram_read_miss_pJ, cfg.row_miss_ratio);
    const double wr = avg_dram_energy(cfg.dram_write_hit_pJ, cfg.dram_write_miss_pJ, cfg.row_miss_ratio);
    const int bits = clustering ? clustering->bits : 32;
    m.dram = dram_accesses_from_elements(elements, bits, cfg.bus_width_bits, cfg.word_bits);
    if (clustering) {
        const double e_sram = cfg.sram_read_energy(bits);
        const std::uint64_t k = std::uint64_t{1} << bits;
        m.tables = clustering->scope == Scope::all_layers ? 1 : conv_layer_indices(net).size();
        m.table_loads = k * m.tables;
        const auto words_per_access = static_cast<std::uint64_t>(cfg.bus_width_bits / cfg.word_bits);
        m.dram.reads += m.tables * ceil_div(k, words_per_access);
        // One table lookup per streamed weight; table fills priced as reads.
        m.sram_reads = elements.weight_reads;
        m.sram_mJ = (static_cast<double>(m.sram_reads) + static_cast<double>(m.table_loads)) * e_sram * 1e-9;
        // SRAM static energy is taken as zero: it stays far below 0.1% of the frame energy.
    }
    m.dram_mJ = (static_cast<double>(m.dram.reads) * rd + static_cast<double>(m.dram.writes) * wr) * 1e-9;
    return m;
}

}  // namespace detail

/// Energy, bandwidth and FPS of one frame, with relative figures against the
/// unclustered 32-bit baseline of the same network.
inline EnergyReport frame_energy(const NetworkDef& net, const AccessProfile& elements, const OpProfile& ops,
                                 const EnergyConfig& cfg, const std::optional<Clustering>& clustering = {}) {
    cfg.validate();
    if (clustering && (clustering->bits < 5 || clustering->bits > 8))
        throw ArgumentError("clustering supports 5..8-bit indices");

    const auto base = detail::memory_energy(net, elements, cfg, std::nullopt);
    const auto mem = detail::memory_energy(net, elements, cfg, clustering);
    const double fp = fp_energy_mJ(ops, cfg);

    EnergyReport r;
    r.configuration = clustering ? "Clustered " + std::to_string(clustering->bits) + " bits" : "Baseline";
    r.weight_bits = clustering ? clustering->bits : 32;
    if (clustering) r.scope = clustering->scope;
    r.elements = elements;
    r.table_load_reads = mem.table_loads;
    r.dram = mem.dram;
    r.sram_reads = mem.sram_reads;
    r.avg_read_pJ = avg_dram_energy(cfg.dram_read_hit_pJ, cfg.dram_read_miss_pJ, cfg.row_miss_ratio);
    r.avg_write_pJ = avg_dram_energy(cfg.dram_write_hit_pJ, cfg.dram_write_miss_pJ, cfg.row_miss_ratio);
    r.dram_mJ = mem.dram_mJ;
    r.sram_mJ = mem.sram_mJ;
    r.fp_mJ = fp;
    r.total_mJ = r.dram_mJ + r.sram_mJ + r.fp_mJ;
    r.dram_share = r.dram_mJ / r.total_mJ;
    r.sram_share = r.sram_mJ / r.total_mJ;
    r.fp_share = r.fp_mJ / r.total_mJ;

    const double base_total = base.dram_mJ + fp;
    r.sram_share_of_baseline = r.sram_mJ / base_total;

    const double n = static_cast<double>(elements.total());
    r.weight_access_share = static_cast<double>(elements.weight_reads) / n;
    r.input_access_share = static_cast<double>(elements.input_reads) / n;
    r.output_access_share = static_cast<double>(elements.output_reads + elements.output_writes) / n;

    const double access_bytes = cfg.bus_width_bits / 8.0;
    const double base_bytes = static_cast<double>(base.dram.total()) * access_bytes;
    r.bytes_per_frame = static_cast<double>(mem.dram.total()) * access_bytes;
    r.bandwidth_GBps = r.bytes_per_frame * cfg.target_fps * 1e-9;
    r.max_fps = cfg.target_fps * base_bytes / r.bytes_per_frame;
    r.max_fps_at_peak = cfg.dram_peak_GBps * 1e9 / r.bytes_per_frame;
    r.relative_memory = (r.dram_mJ + r.sram_mJ) / base.dram_mJ;
    r.relative_overall = r.total_mJ / base_total;

    if (clustering) {
        r.sram_read_pJ = cfg.sram_read_energy(clustering->bits);
        r.sram_table_bytes = sram_table_bytes(clustering->bits);
        r.tables = mem.tables;
        r.size_factor = indices_per_word(clustering->bits, cfg.word_bits);
    }
    return r;
}

struct Calibration {
    double scale = 1;          // applied to every FP energy of the reference config
    double fp_mJ = 0;          // FP energy per frame after calibration
    double total_mJ = 0;       // implied frame energy
    double total_error = 0;    // relative deviation of total_mJ from the target total
    EnergyConfig config;       // reference config with calibrated FP energies
};

/// Scales the reference FP energies so that DRAM takes `target_dram_share` of
/// the frame energy. Closed form: FP energy is linear in the scale.
inline Calibration calibrate_fp_energy(double target_total_mJ, double target_dram_share, double dram_mJ,
                                       const OpProfile& ops, const EnergyConfig& reference) {
    if (!(target_dram_share > 0.0 && target_dram_share < 1.0))
        throw ArgumentError("target DRAM share must lie strictly between 0 and 1");
    if (ops.macs == 0) throw ArgumentError("cannot calibrate FP energy without MACs");
    if (!(dram_mJ > 0.0)) throw ArgumentError("DRAM energy must be positive");

    Calibration c;
    c.fp_mJ = dram_mJ * (1.0 - target_dram_share) / target_dram_share;
    c.scale = c.fp_mJ / fp_energy_mJ(ops, reference);
    c.total_mJ = dram_mJ + c.fp_mJ;
    c.total_error = target_total_mJ > 0 ? c.total_mJ / target_total_mJ - 1.0 : 0.0;

    auto& cfg = c.config = reference;
    const double mac = reference.mac_pJ();
    cfg.fp_add_pJ *= c.scale;
    cfg.fp_mul_pJ *= c.scale;
    cfg.fp_mac_pJ = mac * c.scale;
    for (auto* opt : {&cfg.fp_sub_pJ, &cfg.fp_div_pJ, &cfg.fp_exp_pJ, &cfg.fp_sqrt_pJ})
        if (*opt) **opt *= c.scale;
    return c;
}

}  // namespace wclust
