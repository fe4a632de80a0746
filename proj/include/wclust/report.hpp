#pragma once

// JSON, CSV and console renderings of energy reports.

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "wclust/energy.hpp"
#include "wclust/traffic.hpp"

namespace wclust {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::ordered_json to_json(const AccessProfile& p) {
    return {{"weight_reads", p.weight_reads},
            {"input_reads", p.input_reads},
            {"output_reads", p.output_reads},
            {"output_writes", p.output_writes},
            {"total", p.total()}};
}

inline nlohmann::ordered_json to_json(const OpProfile& o) {
    return {{"macs", o.macs},     {"fp_add", o.fp_add}, {"fp_sub", o.fp_sub},
            {"fp_mul", o.fp_mul}, {"fp_div", o.fp_div}, {"fp_exp", o.fp_exp},
            {"fp_sqrt", o.fp_sqrt}, {"total", o.total()},
            {"mac_share", o.total() ? static_cast<double>(o.macs) / static_cast<double>(o.total()) : 0.0}};
}

inline nlohmann::ordered_json to_json(const EnergyReport& r) {
    nlohmann::ordered_json j;
    j["configuration"] = r.configuration;
    j["weight_bits"] = r.weight_bits;
    j["scope"] = r.scope ? nlohmann::ordered_json(to_string(*r.scope)) : nlohmann::ordered_json(nullptr);
    j["dram_reads"] = r.dram.reads;
    j["dram_writes"] = r.dram.writes;
    j["table_load_reads"] = r.table_load_reads;
    j["sram_reads"] = r.sram_reads;
    j["avg_read_pJ"] = r.avg_read_pJ;
    j["avg_write_pJ"] = r.avg_write_pJ;
    j["dram_mJ"] = r.dram_mJ;
    j["sram_mJ"] = r.sram_mJ;
    j["fp_mJ"] = r.fp_mJ;
    j["total_mJ"] = r.total_mJ;
    j["fractions"] = {{"dram", r.dram_share}, {"sram", r.sram_share}, {"fp", r.fp_share}};
    j["sram_share_of_baseline"] = r.sram_share_of_baseline;
    j["access_split"] = {{"weights", r.weight_access_share},
                         {"inputs", r.input_access_share},
                         {"outputs", r.output_access_share}};
    j["bytes_per_frame"] = r.bytes_per_frame;
    j["bandwidth_GBps"] = r.bandwidth_GBps;
    j["max_fps"] = r.max_fps;
    j["max_fps_at_peak"] = r.max_fps_at_peak;
    j["relative_to_baseline"] = {{"memory", r.relative_memory}, {"overall", r.relative_overall}};
    j["sram_read_pJ"] = r.sram_read_pJ;
    j["sram_table_bytes"] = r.sram_table_bytes;
    j["tables"] = r.tables;
    j["size_factor"] = r.size_factor;
    return j;
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string table6_label(const EnergyReport& r) {
    return r.scope ? r.configuration + " (" + to_string(*r.scope) + ")" : r.configuration;
}

/// Fixed column order: configuration, bandwidth, FPS, relative memory and overall energy.
inline std::string table6_csv(const std::vector<EnergyReport>& rows) {
    std::string out = "configuration,bandwidth_GBps,fps,relative_memory_energy_pct,relative_overall_energy_pct\n";
    for (const auto& r : rows)
        out += table6_label(r) + "," + format_fixed(r.bandwidth_GBps, 2) + "," + format_fixed(r.max_fps, 2) + "," +
               format_fixed(100 * r.relative_memory, 2) + "," + format_fixed(100 * r.relative_overall, 2) + "\n";
    return out;
}

inline std::string table6_text(const std::vector<EnergyReport>& rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-34s %12s %8s %14s %14s\n", "Configuration", "Bandwidth", "FPS",
                  "Memory energy", "Overall energy");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-34s %7.1f GB/s %8.0f %13.1f%% %13.1f%%\n", table6_label(r).c_str(),
                      r.bandwidth_GBps, r.max_fps, 100 * r.relative_memory, 100 * r.relative_overall);
        out += buf;
    }
    return out;
}

}  // namespace wclust
