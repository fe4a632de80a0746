#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "oracles.hpp"

using namespace wclust;
using namespace wclust::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = WCLUST_DATA_DIR;
const std::string kYolo = kData + "/yolov3.cfg";
const std::string kToy = kData + "/toy.cfg";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("wclust_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string toy_weights(std::uint64_t seed, bool few_values = false) {
        const auto net = oracle::load_data_net("toy.cfg");
        auto w = synth_weights(net, seed);
        if (few_values)
            for (auto& p : w.layers)
                for (auto& v : p.weights) v = std::round(v * 8.0f) / 8.0f;
        const auto p = path("toy" + std::to_string(seed) + (few_values ? "q" : "") + ".weights");
        write_file(p, write_darknet_weights(w));
        return p;
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

json load_json(const std::string& p) { return json::parse(oracle::read_text(p)); }

}  // namespace

TEST_F(Cli, AnalyzeBaselineRow) {
    AnalyzeOptions o;
    o.cfg_path = kYolo;
    o.json_path = path("a.json");
    ASSERT_EQ(cmd_analyze(o, out_, err_), kOk) << err_.str();
    const auto j = load_json(o.json_path);
    EXPECT_EQ(j["schema_version"], 1);
    const auto& base = j["reports"][0];
    EXPECT_NEAR(base["bandwidth_GBps"].get<double>(), 200.0, 5.0);
    EXPECT_DOUBLE_EQ(base["max_fps"].get<double>(), 25.0);
    EXPECT_DOUBLE_EQ(base["relative_to_baseline"]["memory"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(base["relative_to_baseline"]["overall"].get<double>(), 1.0);
    EXPECT_NE(out_.str().find("Baseline"), std::string::npos);
    EXPECT_EQ(j["manifest"]["inputs"].size(), 2u);
}

TEST_F(Cli, AnalyzeFiveBitRow) {
    AnalyzeOptions o;
    o.cfg_path = kYolo;
    o.bits = 5;
    o.csv_path = path("a.csv");
    ASSERT_EQ(cmd_analyze(o, out_, err_), kOk) << err_.str();
    std::istringstream csv(oracle::read_text(o.csv_path));
    std::string header, base, row;
    std::getline(csv, header);
    std::getline(csv, base);
    std::getline(csv, row);
    EXPECT_EQ(header, "configuration,bandwidth_GBps,fps,relative_memory_energy_pct,relative_overall_energy_pct");
    EXPECT_EQ(row.rfind("Clustered 5 bits (per-layer),", 0), 0u);
    std::istringstream fields(row.substr(row.find(',') + 1));
    double bw = 0, fps = 0;
    char comma = 0;
    fields >> bw >> comma >> fps;
    EXPECT_NEAR(bw, 63.4, 63.4 * 0.02);
    EXPECT_NEAR(fps, 79.0, 1.0);
}

TEST_F(Cli, AnalyzeTinyHandCounts) {
    AnalyzeOptions o;
    o.cfg_path = kData + "/tiny.cfg";
    o.json_path = path("t.json");
    ASSERT_EQ(cmd_analyze(o, out_, err_), kOk) << err_.str();
    const auto t = load_json(o.json_path)["traffic"];
    EXPECT_EQ(t["weight_reads"], 648);
    EXPECT_EQ(t["input_reads"], 432);
    EXPECT_EQ(t["output_reads"], 0);
    EXPECT_EQ(t["output_writes"], 256);
}

TEST_F(Cli, AnalyzeErrors) {
    AnalyzeOptions o;
    o.cfg_path = path("missing.cfg");
    EXPECT_EQ(cmd_analyze(o, out_, err_), kError);
    EXPECT_FALSE(err_.str().empty());
    o.cfg_path = kYolo;
    o.row_model = "diagonal";
    EXPECT_EQ(cmd_analyze(o, out_, err_), kError);
}

TEST_F(Cli, EnergyConfigEnvOverride) {
    EXPECT_EQ(resolve_energy_path("x.cfg"), "x.cfg");
    ::setenv(kEnergyConfigEnv, "/elsewhere/e.cfg", 1);
    EXPECT_EQ(resolve_energy_path(""), "/elsewhere/e.cfg");
    ::unsetenv(kEnergyConfigEnv);
    EXPECT_EQ(resolve_energy_path(""), kData + "/energy_default.cfg");
}

TEST_F(Cli, AnalyzeDeterministic) {
    AnalyzeOptions o;
    o.cfg_path = kYolo;
    o.table6 = true;
    o.json_path = path("1.json");
    o.csv_path = path("1.csv");
    ASSERT_EQ(cmd_analyze(o, out_, err_), kOk);
    const auto first_out = out_.str();
    o.json_path = path("2.json");
    o.csv_path = path("2.csv");
    std::ostringstream out2;
    ASSERT_EQ(cmd_analyze(o, out2, err_), kOk);
    EXPECT_EQ(read_file(path("1.json")), read_file(path("2.json")));
    EXPECT_EQ(read_file(path("1.csv")), read_file(path("2.csv")));
    EXPECT_EQ(first_out, out2.str());
}

TEST_F(Cli, ClusterLosslessAndDeterministic) {
    ClusterOptions o;
    o.cfg_path = kToy;
    o.weights_path = toy_weights(1, true);
    o.out_path = path("a.cwts");
    o.json_path = path("a.json");
    ASSERT_EQ(cmd_cluster(o, out_, err_), kOk) << err_.str();
    const auto j = load_json(o.json_path);
    EXPECT_TRUE(j["lossless"].get<bool>());
    EXPECT_EQ(j["total_sse"], 0.0);
    EXPECT_NE(out_.str().find("lossless"), std::string::npos);

    o.out_path = path("b.cwts");
    o.json_path = path("b.json");
    ASSERT_EQ(cmd_cluster(o, out_, err_), kOk);
    EXPECT_EQ(read_file(path("a.cwts")), read_file(path("b.cwts")));
}

TEST_F(Cli, ClusterPerLayerBeatsGlobalOnToy) {
    ClusterOptions o;
    o.cfg_path = kToy;
    o.weights_path = toy_weights(2);
    o.bits = 5;
    o.out_path = path("l.cwts");
    o.json_path = path("l.json");
    ASSERT_EQ(cmd_cluster(o, out_, err_), kOk);
    o.scope = "all-layers";
    o.out_path = path("g.cwts");
    o.json_path = path("g.json");
    ASSERT_EQ(cmd_cluster(o, out_, err_), kOk);
    EXPECT_LE(load_json(path("l.json"))["total_sse"].get<double>(), load_json(path("g.json"))["total_sse"].get<double>());
}

TEST_F(Cli, ClusterErrors) {
    ClusterOptions o;
    o.cfg_path = kYolo;  // weights belong to a different network
    o.weights_path = toy_weights(1);
    o.out_path = path("x.cwts");
    EXPECT_EQ(cmd_cluster(o, out_, err_), kError);
    EXPECT_NE(err_.str().find("offset"), std::string::npos);
}

TEST_F(Cli, VerifyLosslessPasses) {
    ClusterOptions c;
    c.cfg_path = kToy;
    c.weights_path = toy_weights(3, true);
    c.out_path = path("a.cwts");
    ASSERT_EQ(cmd_cluster(c, out_, err_), kOk);
    VerifyOptions v{kToy, c.weights_path, c.out_path, 7, path("v.json")};
    EXPECT_EQ(cmd_verify(v, out_, err_), kOk) << err_.str();
    const auto j = load_json(v.json_path);
    EXPECT_EQ(j["result"], "PASS");
    EXPECT_EQ(j["output_mse"], 0.0);
}

TEST_F(Cli, VerifyFiveBitReportsError) {
    ClusterOptions c;
    c.cfg_path = kToy;
    c.weights_path = toy_weights(4);
    c.bits = 5;
    c.out_path = path("a.cwts");
    ASSERT_EQ(cmd_cluster(c, out_, err_), kOk);
    VerifyOptions v{kToy, c.weights_path, c.out_path, 7, path("v.json")};
    EXPECT_EQ(cmd_verify(v, out_, err_), kOk);
    const auto j = load_json(v.json_path);
    EXPECT_TRUE(j["bitwise_equivalent"].get<bool>());
    EXPECT_GT(j["output_mse"].get<double>(), 0.0);
}

TEST_F(Cli, VerifyCorruptedCrcFails) {
    ClusterOptions c;
    c.cfg_path = kToy;
    c.weights_path = toy_weights(5);
    c.out_path = path("a.cwts");
    ASSERT_EQ(cmd_cluster(c, out_, err_), kOk);
    auto bytes = read_file(c.out_path);
    bytes[bytes.size() / 2] ^= std::byte{0x10};
    write_file(c.out_path, bytes);
    VerifyOptions v{kToy, c.weights_path, c.out_path, 7, ""};
    EXPECT_EQ(cmd_verify(v, out_, err_), kCheckFailed);
    EXPECT_NE(out_.str().find("FAIL"), std::string::npos);
    EXPECT_NE(out_.str().find("CRC"), std::string::npos);
}

TEST_F(Cli, CompareBuildsTradeoffTable) {
    AnalyzeOptions a;
    a.cfg_path = kYolo;
    CompareOptions c;
    for (int b : {8, 7, 6, 5}) {
        a.bits = b;
        a.json_path = path("r" + std::to_string(b) + ".json");
        ASSERT_EQ(cmd_analyze(a, out_, err_), kOk);
        c.report_paths.push_back(a.json_path);
    }
    c.quality = {"Baseline=55.3", "Clustered 5 bits (per-layer)=40.1"};
    c.quality_name = "map";
    std::ostringstream csv, warn;
    ASSERT_EQ(cmd_compare(c, csv, warn), kOk);
    std::istringstream in(csv.str());
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 6u);
    EXPECT_EQ(lines[0], "configuration,energy_reduction_pct,map");
    EXPECT_EQ(lines[1], "Baseline,0.00,55.3");
    EXPECT_EQ(lines[2].substr(lines[2].rfind(',')), ",");  // no quality given
    EXPECT_NE(warn.str().find("warning"), std::string::npos);
    const auto& five = lines[5];
    EXPECT_EQ(five.rfind("Clustered 5 bits (per-layer),", 0), 0u);
    const double reduction = std::stod(five.substr(five.find(',') + 1));
    EXPECT_NEAR(reduction, 57.4, 1.5);
}

TEST_F(Cli, CompareRejectsForeignJson) {
    write_file(path("x.json"), std::as_bytes(std::span(std::string_view("{\"schema\":\"other\"}"))));
    CompareOptions c;
    c.report_paths = {path("x.json")};
    EXPECT_EQ(cmd_compare(c, out_, err_), kError);
}

TEST_F(Cli, CalibrateReproducesShippedConfig) {
    CalibrateOptions o;
    o.cfg_path = kYolo;
    o.energy_path = kData + "/energy_reference.cfg";
    std::ostringstream cfg;
    ASSERT_EQ(cmd_calibrate(o, cfg, err_), kOk) << err_.str();
    const auto body = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
    EXPECT_EQ(body(cfg.str()), body(oracle::read_text(kData + "/energy_default.cfg")));
}

TEST_F(Cli, MapCommand) {
    const std::string gt = "img 0 0 0 10 10\nimg 2 20 20 30 30\n";
    const std::string det = "img 0 0 0 10 10 0.9\nimg 2 50 50 60 60 0.8\nimg 2 20 20 30 30 0.3\n";
    write_file(path("gt.txt"), std::as_bytes(std::span(gt.data(), gt.size())));
    write_file(path("det.txt"), std::as_bytes(std::span(det.data(), det.size())));
    MapOptions o;
    o.gt_path = path("gt.txt");
    o.det_path = path("det.txt");
    std::ostringstream js;
    ASSERT_EQ(cmd_map(o, js, err_), kOk) << err_.str();
    EXPECT_DOUBLE_EQ(json::parse(js.str())["map"].get<double>(), 0.5);
    o.min_confidence.reset();
    std::ostringstream js2;
    ASSERT_EQ(cmd_map(o, js2, err_), kOk);
    EXPECT_DOUBLE_EQ(json::parse(js2.str())["map"].get<double>(), 0.75);
}

TEST_F(Cli, GenWeightsMatchesNetwork) {
    GenWeightsOptions o{kToy, path("g.weights"), 9};
    ASSERT_EQ(cmd_gen_weights(o, out_, err_), kOk);
    const auto net = oracle::load_data_net("toy.cfg");
    EXPECT_EQ(read_darknet_weights(read_file(o.out_path), net), synth_weights(net, 9));
}
