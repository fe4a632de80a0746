#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wclust/wclust.hpp"

namespace wclust::cli {

using nlohmann::ordered_json;

namespace {

std::string read_text(const std::string& path) {
    const auto bytes = read_file(path);
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

/// Inputs and options of a run. The timestamp is only recorded when
/// SOURCE_DATE_EPOCH is set, so identical inputs give identical outputs.
class Manifest {
public:
    explicit Manifest(std::string command) { j_["tool"] = kToolVersion, j_["command"] = std::move(command); }

    void input(const std::string& role, const std::string& path) {
        const auto bytes = read_file(path);
        j_["inputs"].push_back({{"role", role}, {"path", path}, {"bytes", bytes.size()}, {"crc32", hex32(crc32_of(bytes))}});
    }
    template <class T>
    void option(const std::string& key, const T& value) {
        j_["options"][key] = value;
    }
    ordered_json json() const {
        ordered_json j = j_;
        if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) j["timestamp"] = epoch;
        return j;
    }

private:
    ordered_json j_;
};

NetworkDef load_net(const std::string& path) { return load_network(read_text(path)); }

RowModel parse_row_model(const std::string& s) {
    if (s == "windowed") return RowModel::windowed;
    if (s == "literal") return RowModel::literal;
    throw ArgumentError("unknown row model '" + s + "' (windowed | literal)");
}

Bucketing parse_bucketing(const std::string& s) {
    if (s == "reads-as-inputs") return Bucketing::reads_as_inputs;
    if (s == "shortcut-split") return Bucketing::shortcut_split;
    throw ArgumentError("unknown bucketing '" + s + "' (reads-as-inputs | shortcut-split)");
}

Init parse_init(const std::string& s) {
    if (s == "linspace") return Init::linspace;
    if (s == "kmeans++" || s == "kmeans-pp") return Init::kmeans_pp;
    throw ArgumentError("unknown init '" + s + "' (linspace | kmeans++)");
}

ordered_json config_echo(const EnergyConfig& cfg) {
    ordered_json j;
    j["dram_read_miss_pJ"] = cfg.dram_read_miss_pJ;
    j["dram_read_hit_pJ"] = cfg.dram_read_hit_pJ;
    j["dram_write_miss_pJ"] = cfg.dram_write_miss_pJ;
    j["dram_write_hit_pJ"] = cfg.dram_write_hit_pJ;
    j["row_miss_ratio"] = cfg.row_miss_ratio;
    for (const auto& [bits, e] : cfg.sram_read_pJ) j["sram_read_pJ"][std::to_string(bits)] = e;
    j["fp_add_pJ"] = cfg.fp_add_pJ;
    j["fp_mul_pJ"] = cfg.fp_mul_pJ;
    j["fp_mac_pJ"] = cfg.mac_pJ();
    j["dram_peak_GBps"] = cfg.dram_peak_GBps;
    j["target_fps"] = cfg.target_fps;
    return j;
}

std::string pct(double v) { return format_fixed(100 * v, 1) + "%"; }

}  // namespace

std::string resolve_energy_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kEnergyConfigEnv); env && *env) return env;
    return std::string(WCLUST_DATA_DIR) + "/energy_default.cfg";
}

int cmd_analyze(const AnalyzeOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const auto energy_path = resolve_energy_path(opts.energy_path);
        const auto net = load_net(opts.cfg_path);
        const auto cfg = EnergyConfig::parse(read_text(energy_path));
        TrafficOptions topts;
        topts.rows = parse_row_model(opts.row_model);
        topts.bucketing = parse_bucketing(opts.bucketing);
        const auto scope = parse_scope(opts.scope);

        Manifest manifest("analyze");
        manifest.input("network", opts.cfg_path);
        manifest.input("energy", energy_path);
        manifest.option("row_model", opts.row_model);
        manifest.option("bucketing", opts.bucketing);
        manifest.option("scope", to_string(scope));
        if (opts.bits) manifest.option("bits", *opts.bits);
        manifest.option("table6", opts.table6);

        const auto traffic = aggregate(net, topts);
        const auto ops = op_profile(net);

        std::vector<EnergyReport> rows{frame_energy(net, traffic.total, ops, cfg)};
        std::vector<int> widths;
        if (opts.table6) widths = {8, 7, 6, 5};
        else if (opts.bits) widths = {*opts.bits};
        for (int b : widths) rows.push_back(frame_energy(net, traffic.total, ops, cfg, Clustering{b, scope}));

        const std::uint64_t n_weights = total_conv_weights(net);
        const std::uint64_t n_tables = scope == Scope::all_layers ? 1 : conv_layer_indices(net).size();

        ordered_json j;
        j["schema"] = "wclust.analyze";
        j["schema_version"] = kReportSchemaVersion;
        j["manifest"] = manifest.json();
        j["network"] = {{"input", {net.input.h, net.input.w, net.input.c}},
                        {"layers", net.layers.size()},
                        {"conv_layers", conv_layer_indices(net).size()},
                        {"conv_weights", n_weights}};
        j["energy_config"] = config_echo(cfg);
        j["traffic"] = to_json(traffic.total);
        ordered_json per_layer = ordered_json::array();
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            auto l = to_json(traffic.per_layer[i]);
            l["layer"] = i;
            l["kind"] = kind_name(net.layers[i].kind);
            per_layer.push_back(std::move(l));
        }
        j["traffic_per_layer"] = std::move(per_layer);
        j["ops"] = to_json(ops);
        for (const auto& r : rows) j["reports"].push_back(to_json(r));
        for (int b : {8, 7, 6, 5}) {
            const auto k = std::uint64_t{1} << b;
            const auto aligned = size_reduction_factor(b, Packing::word_aligned, n_weights, k, n_tables);
            const auto tight = size_reduction_factor(b, Packing::tight, n_weights, k, n_tables);
            j["size_reduction"].push_back({{"bits", b},
                                           {"word_aligned_factor", aligned.factor},
                                           {"word_aligned_bits", aligned.stored_bits},
                                           {"tight_factor", tight.factor},
                                           {"tight_bits", tight.stored_bits},
                                           {"original_bits", aligned.original_bits},
                                           {"sram_table_bytes", sram_table_bytes(b)},
                                           {"sram_read_pJ", cfg.sram_read_energy(b)}});
        }

        if (!opts.json_path.empty()) write_text(opts.json_path, j.dump(2) + "\n");
        if (!opts.csv_path.empty()) write_text(opts.csv_path, table6_csv(rows));

        const auto& base = rows.front();
        out << "Network: " << opts.cfg_path << " (" << net.layers.size() << " layers, input " << net.input.w << "x"
            << net.input.h << "x" << net.input.c << ", " << n_weights << " conv weights)\n\n";
        out << "DRAM element accesses: " << traffic.total.total() << "  weights " << pct(base.weight_access_share)
            << "  inputs " << pct(base.input_access_share) << "  outputs " << pct(base.output_access_share) << "\n";
        out << "FP operations: " << ops.total() << "  MAC share " << format_fixed(100.0 * ops.macs / ops.total(), 2)
            << "%\n";
        out << "Baseline energy per frame: " << format_fixed(base.total_mJ, 1) << " mJ  DRAM "
            << pct(base.dram_share) << "  FP " << pct(base.fp_share) << "\n\n";
        out << table6_text(rows) << "\n";
        out << "Size reduction (word-aligned): ";
        for (int b : {8, 7, 6, 5}) out << b << "-bit " << indices_per_word(b) << "x  ";
        out << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "analyze: " << e.what() << "\n";
        return kError;
    }
}

int cmd_cluster(const ClusterOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const auto net = load_net(opts.cfg_path);
        const auto weights = read_darknet_weights(read_file(opts.weights_path), net);
        ClusterConfig cc;
        cc.bits = opts.bits;
        cc.scope = parse_scope(opts.scope);
        cc.seed = opts.seed;
        cc.init = parse_init(opts.init);
        cc.max_iters = opts.max_iters;
        cc.tol = opts.tol;
        if (cc.bits < 5 || cc.bits > 8) throw ArgumentError("--bits must be between 5 and 8");

        const auto views = weights.kernel_views();
        const auto run = cluster_model(views, cc);
        const auto bytes = write_clustered(run.model);
        write_file(opts.out_path, bytes);

        const auto n = run.model.index_count();
        const auto k = cc.clusters();
        const auto aligned = size_reduction_factor(cc.bits, Packing::word_aligned, n, k, run.model.tables.size());
        const bool lossless = run.total_sse() == 0.0;

        Manifest manifest("cluster");
        manifest.input("network", opts.cfg_path);
        manifest.input("weights", opts.weights_path);
        manifest.option("bits", cc.bits);
        manifest.option("scope", to_string(cc.scope));
        manifest.option("seed", cc.seed);
        manifest.option("init", opts.init);
        manifest.option("max_iters", cc.max_iters);
        manifest.option("tol", cc.tol);

        ordered_json j;
        j["schema"] = "wclust.cluster";
        j["schema_version"] = kReportSchemaVersion;
        j["manifest"] = manifest.json();
        j["output"] = {{"path", opts.out_path}, {"bytes", bytes.size()}, {"crc32", hex32(crc32_of(bytes))}};
        j["lossless"] = lossless;
        j["total_sse"] = run.total_sse();
        j["weights"] = n;
        j["stored_bits"] = aligned.stored_bits;
        j["original_bits"] = aligned.original_bits;
        j["size_factor"] = static_cast<double>(aligned.original_bits) / static_cast<double>(aligned.stored_bits);
        for (std::size_t t = 0; t < run.model.tables.size(); ++t) {
            const auto& tab = run.model.tables[t];
            j["tables"].push_back({{"layer_id", tab.layer_id == kGlobalTable ? ordered_json("all")
                                                                             : ordered_json(tab.layer_id)},
                                   {"centroids", tab.table.size()},
                                   {"weights", run.counts[t]},
                                   {"sse", run.sse[t]},
                                   {"iterations", run.iterations[t]}});
        }
        if (!opts.json_path.empty()) write_text(opts.json_path, j.dump(2) + "\n");

        out << "Clustered " << n << " weights into " << run.model.tables.size() << " " << to_string(cc.scope)
            << " table(s) of up to " << k << " centroids (" << cc.bits << "-bit indices)\n";
        for (std::size_t t = 0; t < run.model.tables.size(); ++t) {
            const auto& tab = run.model.tables[t];
            out << "  table " << t << " layer "
                << (tab.layer_id == kGlobalTable ? std::string("all") : std::to_string(tab.layer_id)) << ": "
                << run.counts[t] << " weights, " << tab.table.size() << " centroids, SSE " << std::setprecision(9)
                << run.sse[t] << "\n";
        }
        out << "Total SSE " << run.total_sse() << (lossless ? " (lossless)" : "") << "\n";
        out << "Stored " << aligned.stored_bits / 8 << " bytes vs " << aligned.original_bits / 8
            << " bytes; word-aligned reduction " << aligned.factor << "x\n";
        out << "Wrote " << opts.out_path << " (" << bytes.size() << " bytes)\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "cluster: " << e.what() << "\n";
        return kError;
    }
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
    ordered_json j;
    j["schema"] = "wclust.verify";
    j["schema_version"] = kReportSchemaVersion;
    const auto finish = [&](int code) {
        if (!opts.json_path.empty()) write_text(opts.json_path, j.dump(2) + "\n");
        return code;
    };
    try {
        const auto net = load_net(opts.cfg_path);
        const auto weights = read_darknet_weights(read_file(opts.weights_path), net);
        ClusteredModel model;
        try {
            model = read_clustered(read_file(opts.cwts_path));
        } catch (const FormatError& e) {
            out << "FAIL: " << e.what() << "\n";
            j["result"] = "FAIL";
            j["error"] = e.what();
            return finish(kCheckFailed);
        }

        Manifest manifest("verify");
        manifest.input("network", opts.cfg_path);
        manifest.input("weights", opts.weights_path);
        manifest.input("clustered", opts.cwts_path);
        manifest.option("seed", opts.seed);
        j["manifest"] = manifest.json();

        const auto input = synth_input(net.input, opts.seed);
        DarknetWeights dequantized = weights;
        const auto dense = dequantize_model(model, weights);
        for (std::size_t i = 0; i < dense.size(); ++i) dequantized.layers[i].weights = dense[i];

        const auto original = run_network(net, weights, input);
        const auto reference = run_network(net, dequantized, input);
        const auto packed = run_network(net, weights, model, input, IndexMode::packed);
        const auto unpacked = run_network(net, weights, model, input, IndexMode::unpacked);

        bool equivalent = true;
        for (std::size_t i = 0; i < reference.size(); ++i)
            equivalent = equivalent && bitwise_equal(reference[i], packed[i]) && bitwise_equal(reference[i], unpacked[i]);

        // Error of the detection-head outputs (or the last layer without a head).
        std::vector<std::size_t> heads;
        for (std::size_t i = 0; i < net.layers.size(); ++i)
            if (std::holds_alternative<YoloSpec>(net.layers[i].kind)) heads.push_back(i);
        if (heads.empty()) heads.push_back(net.layers.size() - 1);
        double err_sum = 0;
        std::size_t elems = 0;
        for (std::size_t h : heads) {
            err_sum += mse(original[h], packed[h]) * static_cast<double>(original[h].data.size());
            elems += original[h].data.size();
        }
        const double output_mse = err_sum / static_cast<double>(elems);

        j["bitwise_equivalent"] = equivalent;
        j["output_mse"] = output_mse;
        j["result"] = equivalent ? "PASS" : "FAIL";
        out << "Indirect vs dequantized execution: " << (equivalent ? "bitwise equal" : "MISMATCH") << "\n";
        out << "Clustered vs original output MSE: " << std::setprecision(9) << output_mse << "\n";
        out << (equivalent ? "PASS" : "FAIL") << "\n";
        return finish(equivalent ? kOk : kCheckFailed);
    } catch (const std::exception& e) {
        err << "verify: " << e.what() << "\n";
        j["result"] = "FAIL";
        j["error"] = e.what();
        return finish(kError);
    }
}

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        std::map<std::string, std::string> quality;
        for (const auto& q : opts.quality) {
            const auto eq = q.rfind('=');
            if (eq == std::string::npos) throw ArgumentError("--quality expects LABEL=VALUE, got '" + q + "'");
            quality[q.substr(0, eq)] = q.substr(eq + 1);
        }

        std::vector<std::pair<std::string, double>> rows;  // label, overall relative energy
        std::set<std::string> seen;
        for (const auto& path : opts.report_paths) {
            const auto j = ordered_json::parse(read_text(path));
            if (j.value("schema", "") != "wclust.analyze" || j.value("schema_version", 0) != kReportSchemaVersion ||
                !j.contains("reports") || !j["reports"].is_array())
                throw ArgumentError("'" + path + "' is not a version " + std::to_string(kReportSchemaVersion) +
                                    " analyze report");
            for (const auto& r : j["reports"]) {
                if (!r.contains("configuration") || !r.contains("relative_to_baseline"))
                    throw ArgumentError("'" + path + "' has a report row without the expected fields");
                std::string label = r["configuration"].get<std::string>();
                if (!r["scope"].is_null()) label += " (" + r["scope"].get<std::string>() + ")";
                if (!seen.insert(label).second) continue;
                rows.emplace_back(label, r["relative_to_baseline"]["overall"].get<double>());
            }
        }

        std::string csv = "configuration,energy_reduction_pct," + opts.quality_name + "\n";
        for (const auto& [label, overall] : rows) {
            auto it = quality.find(label);
            if (it == quality.end()) err << "compare: warning: no " << opts.quality_name << " value for '" << label << "'\n";
            csv += label + "," + format_fixed(100.0 * (1.0 - overall), 2) + "," + (it == quality.end() ? "" : it->second) +
                   "\n";
        }
        if (opts.out_path.empty()) out << csv;
        else write_text(opts.out_path, csv);
        return kOk;
    } catch (const std::exception& e) {
        err << "compare: " << e.what() << "\n";
        return kError;
    }
}

int cmd_calibrate(const CalibrateOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const auto energy_path = resolve_energy_path(opts.energy_path);
        const auto net = load_net(opts.cfg_path);
        const auto ref = EnergyConfig::parse(read_text(energy_path));
        const double share = opts.dram_share ? *opts.dram_share : ref.calib_dram_share.value_or(0.0);
        const double total = opts.total_mJ ? *opts.total_mJ : ref.calib_total_mJ.value_or(0.0);

        const auto traffic = aggregate(net);
        const auto ops = op_profile(net);
        const auto base = frame_energy(net, traffic.total, ops, ref);
        auto cal = calibrate_fp_energy(total, share, base.dram_mJ, ops, ref);
        cal.config.calib_dram_share = share;
        if (total > 0) cal.config.calib_total_mJ = total;

        const auto text = "# Calibrated for " + opts.cfg_path + " by `wclust calibrate`\n" + cal.config.serialize();
        if (opts.out_path.empty()) out << text;
        else write_text(opts.out_path, text);
        err << "DRAM " << format_fixed(base.dram_mJ, 1) << " mJ, FP " << format_fixed(cal.fp_mJ, 1) << " mJ, total "
            << format_fixed(cal.total_mJ, 1) << " mJ (" << format_fixed(100 * cal.total_error, 2)
            << "% from target); MAC energy " << format_fixed(cal.config.mac_pJ(), 4) << " pJ\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "calibrate: " << e.what() << "\n";
        return kError;
    }
}

int cmd_map(const MapOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const auto gts = det::parse_ground_truth(read_text(opts.gt_path));
        const auto dets = det::parse_detections(read_text(opts.det_path));
        det::EvalOptions eo;
        eo.iou_threshold = opts.iou;
        eo.min_confidence = opts.min_confidence;
        if (opts.interpolation == "all-point") eo.interpolation = det::Interpolation::all_point;
        else if (opts.interpolation == "11-point") eo.interpolation = det::Interpolation::eleven_point;
        else throw ArgumentError("unknown interpolation '" + opts.interpolation + "' (all-point | 11-point)");

        std::vector<int> classes;
        if (opts.classes == "person-vehicle") {
            classes = det::person_and_vehicle_classes();
        } else if (opts.classes != "all") {
            std::stringstream ss(opts.classes);
            for (std::string item; std::getline(ss, item, ',');) classes.push_back(std::stoi(item));
        }
        const auto m = det::mean_ap(dets, gts, classes, eo);

        ordered_json j;
        j["schema"] = "wclust.map";
        j["schema_version"] = kReportSchemaVersion;
        j["iou_threshold"] = opts.iou;
        j["min_confidence"] = opts.min_confidence ? ordered_json(*opts.min_confidence) : ordered_json(nullptr);
        j["interpolation"] = opts.interpolation;
        j["map"] = m.map;
        for (const auto& [c, ap] : m.per_class)
            j["per_class"].push_back({{"class_id", c},
                                      {"ap", ap.ap},
                                      {"ground_truths", ap.ground_truths},
                                      {"true_positives", ap.true_positives},
                                      {"false_positives", ap.false_positives}});
        out << j.dump(2) << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "map: " << e.what() << "\n";
        return kError;
    }
}

int cmd_gen_weights(const GenWeightsOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const auto net = load_net(opts.cfg_path);
        const auto w = synth_weights(net, opts.seed);
        const auto bytes = write_darknet_weights(w);
        write_file(opts.out_path, bytes);
        out << "Wrote " << opts.out_path << " (" << w.layers.size() << " conv layers, " << total_conv_weights(net)
            << " kernel weights)\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "gen-weights: " << e.what() << "\n";
        return kError;
    }
}

}  // namespace wclust::cli
