#pragma once

#include <cstdint>
#include <vector>

#include "core/model.hpp"
#include "core/tiler.hpp"

namespace oandet {

enum class Assignment { kCenter, kIof };

struct TrainConfig {
    SgdConfig sgd;
    // When false, only patches that contain at least one object are visited,
    // matching how the downstream detector is normally trained; the
    // objectness labels still carry the negatives within those patches.
    bool include_empty_patches = false;
    Assignment assignment = Assignment::kCenter;
    double iof_hi = 0.5;
    double iof_lo = 0.1;
};

struct EpochLog {
    int epoch = 0;
    double learning_rate = 0.0;
    double mean_total = 0.0;
    double mean_class = 0.0;
    double mean_box = 0.0;
    double mean_objectness = 0.0;
};

struct TrainResult {
    ThresholdStats stats{1};
    std::vector<EpochLog> epochs;
    std::uint64_t iterations = 0;
};

// Single-sample SGD over the patch set; per-iteration activation statistics
// are recorded into the returned rolling window (size model.config().stats_window).
TrainResult train_model(Model<float>& model, const std::vector<PatchSample>& patches,
                        const TrainConfig& cfg, std::uint64_t seed);

} // namespace oandet
