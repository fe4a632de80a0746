#pragma once

// Subcommands of the wclust CLI, callable from tests without a process boundary.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wclust::cli {

inline constexpr const char* kToolVersion = "wclust 1.0.0";
inline constexpr const char* kEnergyConfigEnv = "WCLUST_ENERGY_CONFIG";

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kError = 2 };

struct AnalyzeOptions {
    std::string cfg_path;
    std::string energy_path;  // empty: $WCLUST_ENERGY_CONFIG, then the shipped default
    std::optional<int> bits;
    std::string scope = "per-layer";
    bool table6 = false;  // baseline plus every width 8..5
    std::string row_model = "windowed";
    std::string bucketing = "reads-as-inputs";
    std::string json_path;
    std::string csv_path;
};

struct ClusterOptions {
    std::string cfg_path;
    std::string weights_path;
    std::string out_path;
    int bits = 8;
    std::string scope = "per-layer";
    std::uint64_t seed = 0;
    std::string init = "linspace";
    int max_iters = 300;
    double tol = 1e-6;
    std::string json_path;
};

struct VerifyOptions {
    std::string cfg_path;
    std::string weights_path;
    std::string cwts_path;
    std::uint64_t seed = 0;
    std::string json_path;
};

struct CompareOptions {
    std::vector<std::string> report_paths;
    std::vector<std::string> quality;  // "label=value"
    std::string quality_name = "quality";
    std::string out_path;
};

struct CalibrateOptions {
    std::string cfg_path;
    std::string energy_path;
    std::string out_path;
    std::optional<double> total_mJ;
    std::optional<double> dram_share;
};

struct MapOptions {
    std::string gt_path;
    std::string det_path;
    double iou = 0.5;
    std::optional<double> min_confidence = 0.5;
    std::string classes = "all";  // all | person-vehicle | comma-separated ids
    std::string interpolation = "all-point";
};

struct GenWeightsOptions {
    std::string cfg_path;
    std::string out_path;
    std::uint64_t seed = 0;
};

std::string resolve_energy_path(const std::string& flag);

int cmd_analyze(const AnalyzeOptions& opts, std::ostream& out, std::ostream& err);
int cmd_cluster(const ClusterOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);
int cmd_calibrate(const CalibrateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_map(const MapOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gen_weights(const GenWeightsOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace wclust::cli
