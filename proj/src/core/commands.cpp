#include "core/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "core/pgm.hpp"

namespace oandet {

using nlohmann::json;

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open output for writing", path);
    out << text;
    if (!out) throw IoError("failed writing output", path);
}

void write_summary(const std::string& primary_output, json summary, double seconds) {
    summary["wall_seconds"] = seconds;
    write_text_file(primary_output + ".summary.json", summary.dump(2) + "\n");
}

json gate_report_json(const GateReport& report) {
    return json{{"total_patches", report.counts.total_patches},
                {"filtered_patches", report.counts.filtered},
                {"correctly_filtered", report.counts.correctly_filtered},
                {"objects_total", report.counts.objects_total},
                {"objects_lost", report.counts.objects_lost},
                {"precision", report.precision},
                {"recall", report.recall},
                {"skip_ratio", report.skip_ratio}};
}

json bench_row_json(const BenchRow& row) {
    return json{{"threshold", row.threshold},   {"skip_ratio", row.skip_ratio},
                {"gate_precision", row.gate_precision}, {"gate_recall", row.gate_recall},
                {"mAP", row.map},               {"fps", row.fps}};
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file", path);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void require_valid_threshold(double threshold) {
    if (!std::isfinite(threshold) || threshold < 0.0) {
        throw ValidationError("threshold must be a finite value >= 0");
    }
}

} // namespace

SynthOutcome run_synth(const std::string& config_text, const std::string& out_dir) {
    Stopwatch watch;
    const RunConfig cfg = parse_config_text(config_text);

    std::vector<AnnotatedScene> scenes;
    scenes.reserve(static_cast<std::size_t>(cfg.num_scenes));
    for (int i = 0; i < cfg.num_scenes; ++i) {
        scenes.push_back(generate_scene(cfg.scene_spec_for(i)));
    }
    SynthOutcome outcome;
    outcome.manifest_path = write_dataset(scenes, out_dir);
    outcome.num_scenes = cfg.num_scenes;

    std::size_t total_boxes = 0;
    for (const AnnotatedScene& s : scenes) total_boxes += s.boxes.size();
    write_summary(outcome.manifest_path,
                  json{{"command", "synth"},
                       {"seed", cfg.seed},
                       {"config_hash", hex_u64(config_hash(cfg))},
                       {"num_scenes", cfg.num_scenes},
                       {"total_boxes", total_boxes},
                       {"manifest", outcome.manifest_path}},
                  watch.seconds());
    return outcome;
}

TrainResult run_train(const std::string& config_text, const std::string& manifest_path,
                      const std::string& out_checkpoint,
                      const std::function<void(const EpochLog&)>& on_epoch) {
    Stopwatch watch;
    const RunConfig cfg = parse_config_text(config_text);
    const std::vector<AnnotatedScene> scenes = read_dataset(manifest_path);

    std::vector<PatchSample> patches;
    for (const AnnotatedScene& scene : scenes) {
        if (scene.width < cfg.model.patch_size || scene.height < cfg.model.patch_size) {
            throw ValidationError("dataset scene smaller than the configured patch");
        }
        const TilePlan plan = TilePlan::make(scene.width, scene.height,
                                             cfg.model.patch_size, cfg.model.stride);
        std::vector<PatchSample> scene_patches = crop_patches(scene, plan);
        patches.insert(patches.end(), std::make_move_iterator(scene_patches.begin()),
                       std::make_move_iterator(scene_patches.end()));
    }

    Model<float> model(cfg.model, cfg.seed);
    TrainResult result = train_model(model, patches, cfg.train, cfg.seed);
    if (on_epoch) {
        for (const EpochLog& log : result.epochs) on_epoch(log);
    }
    save_model(out_checkpoint, model, result.stats);

    json epochs = json::array();
    for (const EpochLog& log : result.epochs) {
        epochs.push_back({{"epoch", log.epoch},
                          {"learning_rate", log.learning_rate},
                          {"total", log.mean_total},
                          {"class", log.mean_class},
                          {"box", log.mean_box},
                          {"objectness", log.mean_objectness}});
    }
    write_summary(out_checkpoint,
                  json{{"command", "train"},
                       {"seed", cfg.seed},
                       {"config_hash", hex_u64(config_hash(cfg))},
                       {"dataset", manifest_path},
                       {"patches", patches.size()},
                       {"iterations", result.iterations},
                       {"epochs", epochs},
                       {"checkpoint", out_checkpoint},
                       {"checkpoint_checksum",
                        hex_u64(checkpoint_checksum(out_checkpoint))}},
                  watch.seconds());
    return result;
}

CalibrationResult run_calibrate(const LoadedModel& loaded, double k_override,
                                const std::string& out_json) {
    Stopwatch watch;
    const double k = k_override > 0.0 ? k_override : loaded.model.config().gate_k;
    const CalibrationResult result = calibrate_threshold(loaded.stats, k);

    write_text_file(out_json, json{{"threshold", result.threshold},
                                   {"k", result.k},
                                   {"window", result.window},
                                   {"m", result.m},
                                   {"v", result.v}}
                                  .dump(2) +
                                  "\n");
    write_summary(out_json,
                  json{{"command", "calibrate"},
                       {"checkpoint", loaded.path},
                       {"checkpoint_checksum", hex_u64(loaded.checksum)},
                       {"threshold", result.threshold}},
                  watch.seconds());
    return result;
}

double load_threshold_file(const std::string& path) {
    const json doc = json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("threshold") ||
        !doc.at("threshold").is_number()) {
        throw IoError("not a calibration file (expected {\"threshold\": ...})", path);
    }
    return doc.at("threshold").get<double>();
}

SceneResult run_infer(const LoadedModel& loaded, const std::string& scene_path,
                      const std::string& annotation_path, double threshold,
                      const std::string& out_json) {
    Stopwatch watch;
    require_valid_threshold(threshold);
    const PgmImage img = read_pgm(scene_path);
    AnnotatedScene scene;
    scene.width = img.width;
    scene.height = img.height;
    scene.raster = img.pixels;
    if (!annotation_path.empty()) {
        int w = 0, h = 0;
        scene.boxes = read_annotation(annotation_path, &w, &h);
        if (w != scene.width || h != scene.height) {
            throw IoError("annotation dimensions do not match scene", annotation_path);
        }
    }

    InferParams params = infer_params_from(loaded.model.config());
    params.threshold = threshold;
    const SceneResult result = infer_scene(loaded.model, scene, params);

    json dets = json::array();
    for (const Detection& d : result.detections) {
        dets.push_back({{"x_min", d.box.x_min},
                        {"y_min", d.box.y_min},
                        {"x_max", d.box.x_max},
                        {"y_max", d.box.y_max},
                        {"class_id", d.class_id},
                        {"score", d.score}});
    }
    write_text_file(out_json, dets.dump(2) + "\n");
    write_summary(out_json,
                  json{{"command", "infer"},
                       {"checkpoint", loaded.path},
                       {"checkpoint_checksum", hex_u64(loaded.checksum)},
                       {"scene", scene_path},
                       {"threshold", threshold},
                       {"patches", result.patches},
                       {"detections", result.detections.size()},
                       {"gate_report", gate_report_json(finalize_gate_report(result.gate))}},
                  watch.seconds());
    return result;
}

BenchResult run_bench(const LoadedModel& loaded, const std::string& manifest_path,
                      double threshold, int workers, double stub_cost_ms,
                      const std::string& out_json) {
    Stopwatch watch;
    require_valid_threshold(threshold);
    const std::vector<AnnotatedScene> scenes = read_dataset(manifest_path);

    InferParams params = infer_params_from(loaded.model.config());
    params.threshold = threshold;
    params.workers = workers;
    params.stub_cost_ms = stub_cost_ms;
    BenchResult result = bench_dataset(loaded.model, scenes, params);

    write_text_file(out_json, bench_row_json(result.row).dump(2) + "\n");
    write_summary(out_json,
                  json{{"command", "bench"},
                       {"checkpoint", loaded.path},
                       {"checkpoint_checksum", hex_u64(loaded.checksum)},
                       {"dataset", manifest_path},
                       {"workers", workers},
                       {"stub_cost_ms", stub_cost_ms},
                       {"patches", result.patches},
                       {"gate_report", gate_report_json(finalize_gate_report(result.gate))}},
                  watch.seconds());
    return result;
}

std::vector<BenchResult> run_sweep(const LoadedModel& loaded,
                                   const std::string& manifest_path,
                                   const std::vector<double>& thresholds, int workers,
                                   const std::string& out_csv) {
    Stopwatch watch;
    if (thresholds.empty()) throw ValidationError("sweep needs at least one threshold");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        require_valid_threshold(thresholds[i]);
        if (i > 0 && thresholds[i] < thresholds[i - 1]) {
            throw ValidationError("sweep thresholds must be sorted ascending");
        }
    }
    const std::vector<AnnotatedScene> scenes = read_dataset(manifest_path);

    InferParams params = infer_params_from(loaded.model.config());
    params.workers = workers;
    std::vector<BenchResult> results = sweep_dataset(loaded.model, scenes, thresholds, params);

    std::vector<BenchRow> rows;
    rows.reserve(results.size());
    for (const BenchResult& r : results) rows.push_back(r.row);
    write_text_file(out_csv, sweep_csv(rows));

    write_summary(out_csv,
                  json{{"command", "sweep"},
                       {"checkpoint", loaded.path},
                       {"checkpoint_checksum", hex_u64(loaded.checksum)},
                       {"dataset", manifest_path},
                       {"workers", workers},
                       {"thresholds", thresholds}},
                  watch.seconds());
    return results;
}

} // namespace oandet
