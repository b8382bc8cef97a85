#pragma once

#include <cstdint>
#include <vector>

#include "core/geometry.hpp"
#include "core/layers.hpp"
#include "core/losses.hpp"
#include "core/sgd.hpp"
#include "core/tensor.hpp"

namespace oandet {

// Per-cell binary labels on an S x S grid over one patch.
struct GridLabels {
    int grid = 0;
    std::vector<std::uint8_t> target; // row-major [cell_y][cell_x]
    std::vector<std::uint8_t> ignore;

    int positives() const {
        int n = 0;
        for (std::uint8_t t : target) n += t;
        return n;
    }
};

// A cell is positive iff some box center falls inside it (half-open cells, so
// every center lands in exactly one). Boxes must have centers in [0, patch)^2.
GridLabels assign_center(const std::vector<GroundTruthBox>& boxes, int patch_px,
                         int grid);

// Overlap-based alternative: positive when intersection-over-foreground
// (cell area as denominator) reaches `hi` for some box, negative when below
// `lo` against every box, ignored in between.
GridLabels assign_iof(const std::vector<GroundTruthBox>& boxes, int patch_px,
                      int grid, double hi, double lo);

template <typename T>
struct ActivationMap {
    int grid = 0;
    double cell_px = 0.0; // patch pixels per grid cell
    Tensor<T> logits;     // [1, 1, S, S]
    Tensor<T> probs;      // sigmoid(logits)

    double max_prob() const {
        double m = 0.0;
        for (T p : probs.values) m = std::max(m, static_cast<double>(p));
        return m;
    }
};

// Objectness head over a backbone tap. The tap's spatial extent must be S,
// 2S or 4S; the stem adapts accordingly:
//   2S: 3x3 stride-2 conv (the canonical shape)
//    S: 3x3 stride-1 conv
//   4S: 3x3 stride-2 conv, then a 2x2 space-to-depth fold
// followed by 1x1 mid and 1x1 single-channel output convolutions.
template <typename T>
struct OanHeadConfig {
    int tap_channels = 0;
    int tap_extent = 0;
    int grid = 0;
    int mid_channels = 64;
    int hidden_channels = 128;
    T output_bias_init = T(-2);
};

template <typename T>
struct OanHeadCache {
    Tensor<T> tap;
    Tensor<T> stem_out;
    Tensor<T> stem_act;
    Tensor<T> folded; // factor-4 only
    Tensor<T> mid_out;
    Tensor<T> mid_act;
};

template <typename T>
class OanHead {
public:
    OanHead() = default;
    OanHead(const OanHeadConfig<T>& cfg, Rng& rng);

    ActivationMap<T> forward(const Tensor<T>& tap, double patch_px,
                             OanHeadCache<T>* cache = nullptr) const;

    // Returns the gradient with respect to the tap; accumulates parameter
    // gradients. `cache` must come from the matching forward call.
    Tensor<T> backward(const Tensor<T>& upstream_logits, const OanHeadCache<T>& cache);

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix);
    void zero_grads();
    int grid() const { return cfg_.grid; }
    int factor() const { return factor_; }

    ConvLayer<T> stem, mid, out;

private:
    OanHeadConfig<T> cfg_;
    int factor_ = 0;
};

template <typename T>
struct OanLossResult {
    T value = T(0);
    Tensor<T> dlogits;
};

// Focal loss of the activation map against grid labels, averaged over all
// S^2 cells (ignored cells contribute zero but stay in the denominator).
template <typename T>
OanLossResult<T> oan_loss(const ActivationMap<T>& map, const GridLabels& labels,
                          T alpha, T gamma);

// Rolling per-map statistics feeding threshold calibration: the max and the
// population standard deviation of each activation map seen during training,
// kept for the most recent `window` maps.
class ThresholdStats {
public:
    explicit ThresholdStats(std::size_t window);

    void record(double max_prob, double std_prob);
    std::size_t size() const { return full_ ? max_.size() : head_; }
    std::size_t window() const { return window_; }

    // Oldest to newest, for serialization.
    std::vector<double> max_values() const;
    std::vector<double> std_values() const;

    double mean_max() const;
    double mean_std() const;

private:
    std::size_t window_ = 0;
    std::size_t head_ = 0;
    bool full_ = false;
    std::vector<double> max_;
    std::vector<double> std_;
};

struct MapStats {
    double max = 0.0;
    double stddev = 0.0;
};

template <typename T>
MapStats activation_stats(const Tensor<T>& probs);

struct CalibrationResult {
    double threshold = 0.0;
    double m = 0.0; // mean of per-map maxima
    double v = 0.0; // mean of per-map standard deviations
    double k = 0.0;
    std::size_t window = 0;
};

// T = (m + v)^2 / k. Throws CalibrationError when no statistics were recorded.
CalibrationResult calibrate_threshold(const ThresholdStats& stats, double k);

struct GateDecision {
    bool passed = false;
    double confidence = 0.0;
    double threshold = 0.0;
};

// Patch passes the gate iff its peak activation strictly exceeds T.
template <typename T>
GateDecision gate(const ActivationMap<T>& map, double threshold);

} // namespace oandet
