// Command-line front end; all real work happens behind the C API.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oandet.h"

namespace {

int fail(oandet_status status) {
    std::fprintf(stderr, "error: %s\n", oandet_last_error());
    return static_cast<int>(status);
}

// Reads the config file and applies an optional seed override. The text is
// handed to the library as-is when no override is requested, so even a
// non-JSON file produces the library's own validation error.
bool load_config_text(const std::string& path, const std::optional<std::uint64_t>& seed,
                      std::string& out_text) {
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "error: cannot open config: %s\n", path.c_str());
        return false;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    out_text = buf.str();
    if (!seed) return true;

    nlohmann::json doc = nlohmann::json::parse(out_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        // Leave the text alone; the library reports the config error.
        return true;
    }
    doc["seed"] = *seed;
    out_text = doc.dump();
    return true;
}

struct ModelGuard {
    oandet_model* handle = nullptr;
    ~ModelGuard() { oandet_model_close(handle); }
};

bool resolve_threshold(const std::optional<double>& value, const std::string& file,
                       double& out, int& exit_code) {
    if (value && !file.empty()) {
        std::fprintf(stderr, "error: pass either --threshold or --threshold-file\n");
        exit_code = static_cast<int>(OANDET_ERR_CONFIG);
        return false;
    }
    if (!file.empty()) {
        const oandet_status s = oandet_load_threshold(file.c_str(), &out);
        if (s != OANDET_OK) {
            exit_code = fail(s);
            return false;
        }
        return true;
    }
    out = value.value_or(0.0);
    return true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated patch detector for large sparse scenes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", oandet_version());

    std::string config_path, out_path, dataset_path, checkpoint_path, scene_path;
    std::string annotation_path, threshold_file, thresholds_arg;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold;
    int workers = 1;
    int points = 0;
    double t_max = 0.9;
    double stub_cost_ms = 0.0;
    double k = 0.0;
    bool quiet = false;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--config", config_path, "Config JSON")->required();
    synth->add_option("--out", out_path, "Output dataset directory")->required();
    synth->add_option("--seed", seed, "Override the config seed");

    CLI::App* train = app.add_subcommand("train", "Train a model on a dataset");
    train->add_option("--config", config_path, "Config JSON")->required();
    train->add_option("--dataset", dataset_path, "Dataset manifest.json")->required();
    train->add_option("--out", out_path, "Output checkpoint path")->required();
    train->add_option("--seed", seed, "Override the config seed");
    train->add_flag("--quiet", quiet, "Suppress per-epoch progress");

    CLI::App* calibrate = app.add_subcommand("calibrate", "Derive the gate threshold");
    calibrate->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    calibrate->add_option("--out", out_path, "Output calibration JSON")->required();
    calibrate->add_option("--k", k, "Calibration divisor (default: stored in checkpoint)");

    CLI::App* infer = app.add_subcommand("infer", "Run detection on one scene");
    infer->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    infer->add_option("--scene", scene_path, "Scene image (binary PGM)")->required();
    infer->add_option("--annotation", annotation_path, "Scene annotation JSON");
    infer->add_option("--threshold", threshold, "Gate threshold");
    infer->add_option("--threshold-file", threshold_file, "Calibration JSON with the threshold");
    infer->add_option("--out", out_path, "Output detections JSON")->required();

    CLI::App* bench = app.add_subcommand("bench", "Benchmark a dataset at one threshold");
    bench->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    bench->add_option("--dataset", dataset_path, "Dataset manifest.json")->required();
    bench->add_option("--threshold", threshold, "Gate threshold");
    bench->add_option("--threshold-file", threshold_file, "Calibration JSON with the threshold");
    bench->add_option("--workers", workers, "Patch-level worker threads");
    bench->add_option("--stub-cost-ms", stub_cost_ms,
                      "Replace the detector with a fixed busy-wait per passed patch");
    bench->add_option("--out", out_path, "Output row JSON")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "Benchmark a list of thresholds");
    sweep->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    sweep->add_option("--dataset", dataset_path, "Dataset manifest.json")->required();
    sweep->add_option("--thresholds", thresholds_arg, "Comma-separated thresholds");
    sweep->add_option("--points", points, "Evenly spaced threshold count from 0 to --t-max");
    sweep->add_option("--t-max", t_max, "Upper end of the --points grid");
    sweep->add_option("--workers", workers, "Patch-level worker threads");
    sweep->add_option("--out", out_path, "Output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        std::string config_text;
        if (!load_config_text(config_path, seed, config_text)) return OANDET_ERR_IO;
        const oandet_status s = oandet_synth(config_text.c_str(), out_path.c_str());
        if (s != OANDET_OK) return fail(s);
        std::printf("dataset written to %s\n", out_path.c_str());
        return 0;
    }

    if (train->parsed()) {
        std::string config_text;
        if (!load_config_text(config_path, seed, config_text)) return OANDET_ERR_IO;
        const oandet_status s = oandet_train(config_text.c_str(), dataset_path.c_str(),
                                             out_path.c_str(), quiet ? 0 : 1);
        if (s != OANDET_OK) return fail(s);
        std::printf("checkpoint written to %s\n", out_path.c_str());
        return 0;
    }

    ModelGuard model;
    const oandet_status open_status =
        oandet_model_open(checkpoint_path.c_str(), &model.handle);
    if (open_status != OANDET_OK) return fail(open_status);

    if (calibrate->parsed()) {
        double t = 0.0;
        const oandet_status s = oandet_calibrate(model.handle, k, out_path.c_str(), &t);
        if (s != OANDET_OK) return fail(s);
        std::printf("threshold %.10g written to %s\n", t, out_path.c_str());
        return 0;
    }

    if (infer->parsed()) {
        double t = 0.0;
        int code = 0;
        if (!resolve_threshold(threshold, threshold_file, t, code)) return code;
        const oandet_status s = oandet_infer(
            model.handle, scene_path.c_str(),
            annotation_path.empty() ? nullptr : annotation_path.c_str(), t,
            out_path.c_str());
        if (s != OANDET_OK) return fail(s);
        std::printf("detections written to %s\n", out_path.c_str());
        return 0;
    }

    if (bench->parsed()) {
        double t = 0.0;
        int code = 0;
        if (!resolve_threshold(threshold, threshold_file, t, code)) return code;
        const oandet_status s = oandet_bench(model.handle, dataset_path.c_str(), t,
                                             workers, stub_cost_ms, out_path.c_str());
        if (s != OANDET_OK) return fail(s);
        std::printf("bench row written to %s\n", out_path.c_str());
        return 0;
    }

    // sweep
    std::vector<double> list;
    if (!thresholds_arg.empty()) {
        std::stringstream ss(thresholds_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                list.push_back(std::stod(item));
            } catch (...) {
                std::fprintf(stderr, "error: bad threshold '%s'\n", item.c_str());
                return OANDET_ERR_CONFIG;
            }
        }
    } else if (points > 1) {
        for (int i = 0; i < points; ++i) {
            list.push_back(t_max * static_cast<double>(i) / (points - 1));
        }
    } else {
        std::fprintf(stderr, "error: sweep needs --thresholds or --points >= 2\n");
        return OANDET_ERR_CONFIG;
    }
    const oandet_status s = oandet_sweep(model.handle, dataset_path.c_str(), list.data(),
                                         list.size(), workers, out_path.c_str());
    if (s != OANDET_OK) return fail(s);
    std::printf("sweep written to %s\n", out_path.c_str());
    return 0;
}
