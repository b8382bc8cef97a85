#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/tiler.hpp"

namespace oandet {

struct InferParams {
    double threshold = 0.0; // objectness gate; 0 passes everything with signal
    double keep_threshold = 0.05;
    double nms_iou = 0.1;
    int workers = 1;
    // When positive, the detection head is replaced by a busy-wait of this
    // many milliseconds per passed patch (for timing experiments).
    double stub_cost_ms = 0.0;
};

InferParams infer_params_from(const ModelConfig& cfg);

struct SceneResult {
    std::vector<Detection> detections; // scene coordinates, deduplicated
    std::vector<std::uint8_t> passed;  // per patch, plan order
    std::vector<double> confidence;    // per patch peak activation
    GateCounts gate;
    std::size_t patches = 0;
};

// Full per-scene pass: tile, run the objectness stage on every patch, gate,
// run the detector on surviving patches, merge back to scene coordinates.
SceneResult infer_scene(const Model<float>& model, const AnnotatedScene& scene,
                        const InferParams& params);

struct BenchRow {
    double threshold = 0.0;
    double skip_ratio = 0.0;
    double gate_precision = 1.0;
    double gate_recall = 1.0;
    double map = 0.0;
    double fps = 0.0; // patches per second, whole pipeline
};

struct BenchResult {
    BenchRow row;
    GateCounts gate;
    std::size_t patches = 0;
    double seconds = 0.0;
    // Concatenated per-patch pass flags in scene order, for set comparisons.
    std::vector<std::uint8_t> passed;
};

BenchResult bench_dataset(const Model<float>& model,
                          const std::vector<AnnotatedScene>& scenes,
                          const InferParams& params);

std::vector<BenchResult> sweep_dataset(const Model<float>& model,
                                       const std::vector<AnnotatedScene>& scenes,
                                       const std::vector<double>& thresholds,
                                       const InferParams& params);

std::string sweep_csv(const std::vector<BenchRow>& rows);

} // namespace oandet
