#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace wclust::cli;

int main(int argc, char** argv) {
    CLI::App app{"Memory-traffic, energy and clustering tools for Darknet YOLO networks"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    AnalyzeOptions an;
    auto* analyze = app.add_subcommand("analyze", "Per-frame DRAM traffic, energy and bandwidth");
    analyze->add_option("--cfg", an.cfg_path, "Darknet network config")->required()->check(CLI::ExistingFile);
    analyze->add_option("--energy", an.energy_path, "Energy config (default: $WCLUST_ENERGY_CONFIG or the shipped one)");
    analyze->add_option("--bits", an.bits, "Clustered index width")->check(CLI::Range(5, 8));
    analyze->add_option("--scope", an.scope, "per-layer | all-layers")->capture_default_str();
    analyze->add_flag("--table6", an.table6, "Baseline plus 8, 7, 6 and 5-bit clustering");
    analyze->add_option("--row-model", an.row_model, "windowed | literal")->capture_default_str();
    analyze->add_option("--bucketing", an.bucketing, "reads-as-inputs | shortcut-split")->capture_default_str();
    analyze->add_option("--json", an.json_path, "Write the full report as JSON");
    analyze->add_option("--csv", an.csv_path, "Write the comparison table as CSV");

    ClusterOptions cl;
    auto* cluster = app.add_subcommand("cluster", "Cluster convolution weights with 1-D k-means");
    cluster->add_option("--cfg", cl.cfg_path)->required()->check(CLI::ExistingFile);
    cluster->add_option("--weights", cl.weights_path, "Darknet .weights file")->required()->check(CLI::ExistingFile);
    cluster->add_option("--out", cl.out_path, "Output .cwts file")->required();
    cluster->add_option("--bits", cl.bits)->capture_default_str()->check(CLI::Range(5, 8));
    cluster->add_option("--scope", cl.scope, "per-layer | all-layers")->capture_default_str();
    cluster->add_option("--seed", cl.seed)->capture_default_str();
    cluster->add_option("--init", cl.init, "linspace | kmeans++")->capture_default_str();
    cluster->add_option("--max-iters", cl.max_iters)->capture_default_str()->check(CLI::PositiveNumber);
    cluster->add_option("--tol", cl.tol)->capture_default_str();
    cluster->add_option("--json", cl.json_path, "Write a JSON summary");

    VerifyOptions ve;
    auto* verify = app.add_subcommand("verify", "Check indirect execution against dequantized weights");
    verify->add_option("--cfg", ve.cfg_path)->required()->check(CLI::ExistingFile);
    verify->add_option("--weights", ve.weights_path)->required()->check(CLI::ExistingFile);
    verify->add_option("--clustered", ve.cwts_path)->required()->check(CLI::ExistingFile);
    verify->add_option("--seed", ve.seed, "Seed of the synthetic input")->capture_default_str();
    verify->add_option("--json", ve.json_path);

    CompareOptions co;
    auto* compare = app.add_subcommand("compare", "Merge analyze reports with detection quality figures");
    compare->add_option("reports", co.report_paths, "analyze --json outputs")->required()->check(CLI::ExistingFile);
    compare->add_option("--quality", co.quality, "LABEL=VALUE, repeatable");
    compare->add_option("--quality-name", co.quality_name)->capture_default_str();
    compare->add_option("--out", co.out_path, "CSV output (default: stdout)");

    CalibrateOptions ca;
    auto* calibrate = app.add_subcommand("calibrate", "Fit FP energies to a target DRAM share");
    calibrate->add_option("--cfg", ca.cfg_path)->required()->check(CLI::ExistingFile);
    calibrate->add_option("--energy", ca.energy_path, "Reference energy config");
    calibrate->add_option("--out", ca.out_path, "Calibrated config (default: stdout)");
    calibrate->add_option("--total-mJ", ca.total_mJ, "Target frame energy");
    calibrate->add_option("--dram-share", ca.dram_share, "Target DRAM share of the frame energy");

    MapOptions ma;
    auto* map = app.add_subcommand("map", "Mean average precision of detections");
    map->add_option("--gt", ma.gt_path)->required()->check(CLI::ExistingFile);
    map->add_option("--det", ma.det_path)->required()->check(CLI::ExistingFile);
    map->add_option("--iou", ma.iou)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    map->add_option("--min-confidence", ma.min_confidence)->check(CLI::Range(0.0, 1.0));
    map->add_option("--classes", ma.classes, "all | person-vehicle | comma-separated ids")->capture_default_str();
    map->add_option("--interpolation", ma.interpolation, "all-point | 11-point")->capture_default_str();

    GenWeightsOptions ge;
    auto* gen = app.add_subcommand("gen-weights", "Write deterministic synthetic Darknet weights");
    gen->add_option("--cfg", ge.cfg_path)->required()->check(CLI::ExistingFile);
    gen->add_option("--out", ge.out_path)->required();
    gen->add_option("--seed", ge.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kError;
    }

    if (*analyze) return cmd_analyze(an, std::cout, std::cerr);
    if (*cluster) return cmd_cluster(cl, std::cout, std::cerr);
    if (*verify) return cmd_verify(ve, std::cout, std::cerr);
    if (*compare) return cmd_compare(co, std::cout, std::cerr);
    if (*calibrate) return cmd_calibrate(ca, std::cout, std::cerr);
    if (*map) return cmd_map(ma, std::cout, std::cerr);
    return cmd_gen_weights(ge, std::cout, std::cerr);
}
