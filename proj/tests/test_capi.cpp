#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <oandet.h>

// Exercises the shared library through its C surface only, then drives the
// installed CLI binary end to end and checks its exit codes.

namespace {

std::filesystem::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto p = std::filesystem::temp_directory_path() /
             ("oandet_capi_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(p);
    return p;
}

const char* kTinyConfig = R"({
  "seed": 11,
  "dataset": {"num_scenes": 4},
  "scene": {"width": 128, "height": 128, "num_clusters": 2, "cluster_radius": 20.0,
             "object_size": [[6.0, 12.0], [7.0, 13.0], [8.0, 14.0]]},
  "tiling": {"patch_size": 64, "stride": 48},
  "model": {"stage_channels": [4, 8, 16], "grid_size": 8,
             "oan_mid_channels": 6, "oan_hidden_channels": 8, "det_stem_channels": 8},
  "train": {"epochs": 2, "decay_epochs": [1], "stats_window": 200}
})";

struct CapiFixture {
    std::filesystem::path dir;
    std::string manifest;
    std::string ckpt;
    oandet_model* model = nullptr;

    CapiFixture() {
        dir = fresh_dir("run");
        const std::string data = (dir / "data").string();
        REQUIRE(oandet_synth(kTinyConfig, data.c_str()) == OANDET_OK);
        manifest = data + "/manifest.json";
        ckpt = (dir / "model.ckpt").string();
        REQUIRE(oandet_train(kTinyConfig, manifest.c_str(), ckpt.c_str(), 0) == OANDET_OK);
        REQUIRE(oandet_model_open(ckpt.c_str(), &model) == OANDET_OK);
        REQUIRE(model != nullptr);
    }
    ~CapiFixture() { oandet_model_close(model); }
};

CapiFixture& fixture() {
    static CapiFixture f;
    return f;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(OANDET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("version and error strings are always available") {
    CHECK(oandet_version() != nullptr);
    CHECK(oandet_last_error() != nullptr);
}

TEST_CASE("null arguments are rejected as config errors") {
    CHECK(oandet_synth(nullptr, "/tmp/x") == OANDET_ERR_CONFIG);
    CHECK(std::string(oandet_last_error()).find("null") != std::string::npos);
    CHECK(oandet_model_open(nullptr, nullptr) == OANDET_ERR_CONFIG);
    uint64_t n = 0;
    CHECK(oandet_model_param_count(nullptr, &n) == OANDET_ERR_CONFIG);
}

TEST_CASE("status codes distinguish io config and numeric failures") {
    const auto dir = fresh_dir("err");
    oandet_model* m = nullptr;
    CHECK(oandet_model_open((dir / "missing.ckpt").string().c_str(), &m) == OANDET_ERR_IO);
    CHECK(m == nullptr);
    CHECK(std::string(oandet_last_error()).find("missing.ckpt") != std::string::npos);

    CHECK(oandet_synth("{ not json", (dir / "d").string().c_str()) == OANDET_ERR_CONFIG);
    CHECK(oandet_synth("{\"bogus_key\": 1}", (dir / "d").string().c_str()) ==
          OANDET_ERR_CONFIG);
    CHECK(std::string(oandet_last_error()).find("bogus_key") != std::string::npos);

    // A corrupt checkpoint is an I/O failure, not a crash.
    const std::string bad = (dir / "bad.ckpt").string();
    {
        std::ofstream f(bad, std::ios::binary);
        f << "OANCKPT1garbagegarbage";
    }
    CHECK(oandet_model_open(bad.c_str(), &m) == OANDET_ERR_IO);

    // Diverging training surfaces as a numeric failure.
    auto& fx = fixture();
    const std::string hot = R"({
      "seed": 11,
      "dataset": {"num_scenes": 4},
      "scene": {"width": 128, "height": 128, "num_clusters": 2, "cluster_radius": 20.0,
                 "object_size": [[6.0, 12.0], [7.0, 13.0], [8.0, 14.0]]},
      "tiling": {"patch_size": 64, "stride": 48},
      "model": {"stage_channels": [4, 8, 16], "grid_size": 8,
                 "oan_mid_channels": 6, "oan_hidden_channels": 8, "det_stem_channels": 8},
      "train": {"epochs": 2, "learning_rate": 1e9}
    })";
    CHECK(oandet_train(hot.c_str(), fx.manifest.c_str(),
                       (dir / "hot.ckpt").string().c_str(), 0) == OANDET_ERR_NUMERIC);
}

TEST_CASE("model introspection matches the trained configuration") {
    auto& fx = fixture();
    uint64_t params = 0;
    REQUIRE(oandet_model_param_count(fx.model, &params) == OANDET_OK);
    CHECK(params > 1000);

    int32_t patch = 0;
    REQUIRE(oandet_model_patch_size(fx.model, &patch) == OANDET_OK);
    CHECK(patch == 64);

    uint64_t checksum = 0;
    REQUIRE(oandet_model_checksum(fx.model, &checksum) == OANDET_OK);
    CHECK(checksum != 0);
}

TEST_CASE("calibrate infer bench and sweep through the c surface") {
    auto& fx = fixture();
    const std::string tj = (fx.dir / "threshold.json").string();
    double threshold = -1.0;
    REQUIRE(oandet_calibrate(fx.model, 0.0, tj.c_str(), &threshold) == OANDET_OK);
    CHECK(threshold > 0.0);
    CHECK(threshold < 1.0);

    double reread = 0.0;
    REQUIRE(oandet_load_threshold(tj.c_str(), &reread) == OANDET_OK);
    CHECK(reread == threshold);
    CHECK(oandet_load_threshold((fx.dir / "nope.json").string().c_str(), &reread) ==
          OANDET_ERR_IO);

    const std::string scene = (fx.dir / "data" / "scene_0000.pgm").string();
    const std::string ann = (fx.dir / "data" / "scene_0000.json").string();
    const std::string dets = (fx.dir / "dets.json").string();
    REQUIRE(oandet_infer(fx.model, scene.c_str(), ann.c_str(), 0.0, dets.c_str()) ==
            OANDET_OK);
    CHECK(std::filesystem::exists(dets));
    CHECK(oandet_infer(fx.model, (fx.dir / "no.pgm").string().c_str(), nullptr, 0.0,
                       dets.c_str()) == OANDET_ERR_IO);

    const std::string bench = (fx.dir / "bench.json").string();
    REQUIRE(oandet_bench(fx.model, fx.manifest.c_str(), 0.0, 2, 0.0, bench.c_str()) ==
            OANDET_OK);
    CHECK(std::filesystem::exists(bench));

    const std::string csv = (fx.dir / "sweep.csv").string();
    const double grid[3] = {0.0, threshold, 0.9};
    REQUIRE(oandet_sweep(fx.model, fx.manifest.c_str(), grid, 3, 1, csv.c_str()) ==
            OANDET_OK);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "threshold,skip_ratio,gate_precision,gate_recall,mAP,fps");
}

TEST_CASE("cli subcommands wire the pipeline with documented exit codes") {
    const auto dir = fresh_dir("cli");
    const std::string cfg_path = (dir / "config.json").string();
    {
        std::ofstream f(cfg_path);
        f << kTinyConfig;
    }

    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("synth --help") == 0);

    // Missing config file: I/O error, exit 2.
    CHECK(run_cli("synth --config " + (dir / "absent.json").string() + " --out " +
                  (dir / "d1").string()) == 2);

    // Invalid config content: exit 3.
    const std::string bad_cfg = (dir / "bad.json").string();
    {
        std::ofstream f(bad_cfg);
        f << "{\"no_such_key\": true}";
    }
    CHECK(run_cli("synth --config " + bad_cfg + " --out " + (dir / "d2").string()) == 3);

    // Full happy path against the library-trained checkpoint.
    const std::string data = (dir / "data").string();
    CHECK(run_cli("synth --config " + cfg_path + " --out " + data) == 0);
    CHECK(std::filesystem::exists(data + "/manifest.json"));

    const std::string ckpt = (dir / "cli.ckpt").string();
    CHECK(run_cli("train --config " + cfg_path + " --dataset " + data + "/manifest.json" +
                  " --quiet --out " + ckpt) == 0);
    CHECK(std::filesystem::exists(ckpt));

    const std::string tj = (dir / "threshold.json").string();
    CHECK(run_cli("calibrate --checkpoint " + ckpt + " --out " + tj) == 0);
    CHECK(std::filesystem::exists(tj));

    const std::string dets = (dir / "dets.json").string();
    CHECK(run_cli("infer --checkpoint " + ckpt + " --scene " + data + "/scene_0001.pgm" +
                  " --annotation " + data + "/scene_0001.json" + " --threshold-file " + tj +
                  " --out " + dets) == 0);
    CHECK(std::filesystem::exists(dets));

    const std::string bench = (dir / "bench.json").string();
    CHECK(run_cli("bench --checkpoint " + ckpt + " --dataset " + data + "/manifest.json" +
                  " --threshold 0.0 --out " + bench) == 0);

    const std::string csv = (dir / "sweep.csv").string();
    CHECK(run_cli("sweep --checkpoint " + ckpt + " --dataset " + data + "/manifest.json" +
                  " --thresholds 0.0,0.1,0.5 --out " + csv) == 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "threshold,skip_ratio,gate_precision,gate_recall,mAP,fps");

    // Inference against a checkpoint that does not exist: exit 2.
    CHECK(run_cli("infer --checkpoint " + (dir / "ghost.ckpt").string() + " --scene " +
                  data + "/scene_0001.pgm --threshold 0 --out " + dets) == 2);

    // Exclusive flags: both --threshold and --threshold-file is a usage error.
    CHECK(run_cli("infer --checkpoint " + ckpt + " --scene " + data +
                  "/scene_0001.pgm --threshold 0 --threshold-file " + tj + " --out " +
                  dets) != 0);
}

TEST_CASE("seed flag overrides the config seed end to end") {
    const auto dir = fresh_dir("seed");
    const std::string cfg_path = (dir / "config.json").string();
    {
        std::ofstream f(cfg_path);
        f << kTinyConfig;
    }
    const std::string a = (dir / "a").string();
    const std::string b = (dir / "b").string();
    const std::string c = (dir / "c").string();
    CHECK(run_cli("synth --config " + cfg_path + " --seed 500 --out " + a) == 0);
    CHECK(run_cli("synth --config " + cfg_path + " --seed 500 --out " + b) == 0);
    CHECK(run_cli("synth --config " + cfg_path + " --seed 501 --out " + c) == 0);

    const auto bytes = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(bytes(a + "/scene_0000.pgm") == bytes(b + "/scene_0000.pgm"));
    CHECK(bytes(a + "/scene_0000.pgm") != bytes(c + "/scene_0000.pgm"));
}
