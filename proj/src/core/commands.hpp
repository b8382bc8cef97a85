#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/pipeline.hpp"
#include "core/trainer.hpp"

namespace oandet {

// Each command produces its primary output file(s) plus a run summary at
// "<primary output>.summary.json" recording the config hash, seed, wall time
// and checkpoint identity where applicable.

struct SynthOutcome {
    std::string manifest_path;
    int num_scenes = 0;
};

SynthOutcome run_synth(const std::string& config_text, const std::string& out_dir);

// Trains on every patch of the manifest's scenes and writes a self-describing
// checkpoint (architecture, weights, calibration statistics).
TrainResult run_train(const std::string& config_text, const std::string& manifest_path,
                      const std::string& out_checkpoint,
                      const std::function<void(const EpochLog&)>& on_epoch = {});

// k_override <= 0 uses the k stored in the checkpoint.
CalibrationResult run_calibrate(const LoadedModel& loaded, double k_override,
                                const std::string& out_json);

double load_threshold_file(const std::string& path);

// Runs one scene; detections are written to `out_json` as a flat JSON list.
// `annotation_path` may be empty, in which case the gate report is vacuous.
SceneResult run_infer(const LoadedModel& loaded, const std::string& scene_path,
                      const std::string& annotation_path, double threshold,
                      const std::string& out_json);

BenchResult run_bench(const LoadedModel& loaded, const std::string& manifest_path,
                      double threshold, int workers, double stub_cost_ms,
                      const std::string& out_json);

std::vector<BenchResult> run_sweep(const LoadedModel& loaded,
                                   const std::string& manifest_path,
                                   const std::vector<double>& thresholds, int workers,
                                   const std::string& out_csv);

} // namespace oandet
