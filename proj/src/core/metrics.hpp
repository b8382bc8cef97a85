#pragma once

#include <cstdint>
#include <vector>

#include "core/geometry.hpp"

namespace oandet {

// Deterministic candidate order for greedy NMS and AP ranking: score first,
// then box coordinates and class, so equal-score candidates never depend on
// input order.
bool detection_order(const Detection& a, const Detection& b);

// Greedy class-wise NMS; a kept detection suppresses same-class candidates
// with IoU strictly greater than `iou_threshold`.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

struct PatchDetections {
    int x0 = 0;
    int y0 = 0;
    std::vector<Detection> detections; // in patch coordinates
};

// Translates per-patch detections into scene coordinates and removes
// duplicates from overlapping windows.
std::vector<Detection> merge_scene(const std::vector<PatchDetections>& patches,
                                   double iou_threshold);

struct PatchGateTruth {
    bool has_objects = false;
    bool passed = false;
};

struct GateCounts {
    std::int64_t total_patches = 0;
    std::int64_t filtered = 0;
    std::int64_t correctly_filtered = 0; // filtered and truly empty
    std::int64_t objects_total = 0;
    std::int64_t objects_lost = 0; // every covering patch filtered

    GateCounts& operator+=(const GateCounts& other);
};

struct GateReport {
    GateCounts counts;
    double precision = 1.0;  // correctly_filtered / filtered
    double recall = 1.0;     // 1 - objects_lost / objects_total
    double skip_ratio = 0.0; // filtered / total_patches
};

GateCounts gate_counts(const std::vector<PatchGateTruth>& patches,
                       const std::vector<std::vector<int>>& object_cover);
GateReport finalize_gate_report(const GateCounts& counts);
GateReport gate_report(const std::vector<PatchGateTruth>& patches,
                       const std::vector<std::vector<int>>& object_cover);

struct ApResult {
    std::vector<double> per_class_ap;
    std::vector<std::int64_t> per_class_gt;
    double map = 0.0; // mean over classes that have ground truth
};

// All-point interpolated average precision with greedy score-ordered matching
// at `iou_match`; detections only match ground truth from their own scene.
struct SceneEval {
    const std::vector<Detection>* detections = nullptr;
    const std::vector<GroundTruthBox>* ground_truth = nullptr;
};

ApResult average_precision_pooled(const std::vector<SceneEval>& scenes, double iou_match);

ApResult average_precision(const std::vector<Detection>& detections,
                           const std::vector<GroundTruthBox>& ground_truth,
                           double iou_match);

} // namespace oandet
