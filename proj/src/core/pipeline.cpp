#include "core/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <thread>

#include "core/errors.hpp"

namespace oandet {

namespace {

void busy_wait(double ms) {
    const auto until = std::chrono::steady_clock::now() +
                       std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double, std::milli>(ms));
    while (std::chrono::steady_clock::now() < until) {
    }
}

struct PatchOutcome {
    bool passed = false;
    double confidence = 0.0;
    std::vector<Detection> detections;
};

PatchOutcome run_patch(const Model<float>& model, const PatchSample& patch,
                       const InferParams& params, Tensor<float>& input,
                       ModelCache<float>& cache) {
    for (std::size_t i = 0; i < patch.raster.size(); ++i) {
        input.values[i] = static_cast<float>(patch.raster[i]) / 255.0f;
    }
    const ActivationMap<float> map = model.forward_oan(input, cache);
    const GateDecision decision = gate(map, params.threshold);

    PatchOutcome out;
    out.passed = decision.passed;
    out.confidence = decision.confidence;
    if (!decision.passed) return out;

    if (params.stub_cost_ms > 0.0) {
        busy_wait(params.stub_cost_ms);
        return out;
    }
    const DetOutputs<float> det = model.forward_det(cache);
    out.detections =
        decode_detections(det, model.config().patch_size, params.keep_threshold);
    return out;
}

} // namespace

InferParams infer_params_from(const ModelConfig& cfg) {
    InferParams p;
    p.keep_threshold = cfg.keep_threshold;
    p.nms_iou = cfg.nms_iou;
    return p;
}

SceneResult infer_scene(const Model<float>& model, const AnnotatedScene& scene,
                        const InferParams& params) {
    const ModelConfig& cfg = model.config();
    const TilePlan plan =
        TilePlan::make(scene.width, scene.height, cfg.patch_size, cfg.stride);
    const std::vector<PatchSample> patches = crop_patches(scene, plan);

    std::vector<PatchOutcome> outcomes(patches.size());
    const int workers = std::max(1, params.workers);
    if (workers == 1 || patches.size() <= 1) {
        Tensor<float> input({1, cfg.in_channels, cfg.patch_size, cfg.patch_size});
        ModelCache<float> cache;
        for (std::size_t i = 0; i < patches.size(); ++i) {
            outcomes[i] = run_patch(model, patches[i], params, input, cache);
        }
    } else {
        // Patches are independent; results land in index-addressed slots so
        // the output does not depend on scheduling.
        std::vector<std::thread> pool;
        const std::size_t n = patches.size();
        const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin = static_cast<std::size_t>(w) * chunk;
            if (begin >= n) break;
            const std::size_t end = std::min(n, begin + chunk);
            pool.emplace_back([&, begin, end]() {
                Tensor<float> input({1, cfg.in_channels, cfg.patch_size, cfg.patch_size});
                ModelCache<float> cache;
                for (std::size_t i = begin; i < end; ++i) {
                    outcomes[i] = run_patch(model, patches[i], params, input, cache);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    SceneResult result;
    result.patches = patches.size();
    result.passed.resize(patches.size());
    result.confidence.resize(patches.size());

    std::vector<PatchDetections> per_patch;
    std::vector<PatchGateTruth> truths(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        result.passed[i] = outcomes[i].passed ? 1 : 0;
        result.confidence[i] = outcomes[i].confidence;
        truths[i].has_objects = !patches[i].boxes.empty();
        truths[i].passed = outcomes[i].passed;
        if (!outcomes[i].detections.empty()) {
            per_patch.push_back(
                {patches[i].x0, patches[i].y0, std::move(outcomes[i].detections)});
        }
    }
    result.detections = merge_scene(per_patch, params.nms_iou);
    result.gate = gate_counts(truths, object_cover(scene.boxes, plan));
    return result;
}

BenchResult bench_dataset(const Model<float>& model,
                          const std::vector<AnnotatedScene>& scenes,
                          const InferParams& params) {
    BenchResult bench;
    std::vector<std::vector<Detection>> detections;
    detections.reserve(scenes.size());

    const auto start = std::chrono::steady_clock::now();
    for (const AnnotatedScene& scene : scenes) {
        SceneResult r = infer_scene(model, scene, params);
        bench.gate += r.gate;
        bench.patches += r.patches;
        bench.passed.insert(bench.passed.end(), r.passed.begin(), r.passed.end());
        detections.push_back(std::move(r.detections));
    }
    bench.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();

    std::vector<SceneEval> evals;
    evals.reserve(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        evals.push_back({&detections[i], &scenes[i].boxes});
    }
    const ApResult ap = average_precision_pooled(evals, 0.5);
    const GateReport report = finalize_gate_report(bench.gate);

    bench.row.threshold = params.threshold;
    bench.row.skip_ratio = report.skip_ratio;
    bench.row.gate_precision = report.precision;
    bench.row.gate_recall = report.recall;
    bench.row.map = ap.map;
    bench.row.fps = bench.seconds > 0.0
                        ? static_cast<double>(bench.patches) / bench.seconds
                        : 0.0;
    return bench;
}

std::vector<BenchResult> sweep_dataset(const Model<float>& model,
                                       const std::vector<AnnotatedScene>& scenes,
                                       const std::vector<double>& thresholds,
                                       const InferParams& params) {
    std::vector<BenchResult> rows;
    rows.reserve(thresholds.size());
    for (double t : thresholds) {
        InferParams p = params;
        p.threshold = t;
        rows.push_back(bench_dataset(model, scenes, p));
    }
    return rows;
}

std::string sweep_csv(const std::vector<BenchRow>& rows) {
    std::string out = "threshold,skip_ratio,gate_precision,gate_recall,mAP,fps\n";
    char line[256];
    for (const BenchRow& r : rows) {
        std::snprintf(line, sizeof line, "%.10g,%.6f,%.6f,%.6f,%.6f,%.3f\n", r.threshold,
                      r.skip_ratio, r.gate_precision, r.gate_recall, r.map, r.fps);
        out += line;
    }
    return out;
}

} // namespace oandet
