#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/geometry.hpp"
#include "core/layers.hpp"
#include "core/sgd.hpp"
#include "core/tensor.hpp"

namespace oandet {

// Raw per-cell predictions over an S_d x S_d grid: one logit per class plus
// four box deltas. Deltas encode (center offset within the cell in [0,1),
// log width / cell, log height / cell); no squashing is applied to them, so a
// zero-weight head predicts exactly zero deltas.
template <typename T>
struct DetOutputs {
    int grid = 0;
    int num_classes = 0;
    Tensor<T> class_logits; // [1, C, S, S]
    Tensor<T> box_deltas;   // [1, 4, S, S]
};

struct DetTargets {
    int grid = 0;
    int num_classes = 0;
    std::vector<std::uint8_t> class_target; // [C, S, S], one-hot per positive cell
    std::vector<std::uint8_t> positive;     // [S, S]
    std::vector<std::array<double, 4>> deltas; // [S, S], defined where positive
};

std::array<double, 4> encode_box(const GroundTruthBox& box, int patch_px, int grid);

// Center-in-cell assignment at the detector grid; when several boxes share a
// cell the first one in input order wins.
DetTargets build_det_targets(const std::vector<GroundTruthBox>& boxes, int patch_px,
                             int grid, int num_classes);

template <typename T>
struct DetLossResult {
    T class_loss = T(0);
    T box_loss = T(0);
    Tensor<T> dlogits;
    Tensor<T> ddeltas;
};

// Classification: focal loss over every (cell, class) sigmoid score.
// Regression: smooth-L1 summed over the four delta errors of each positive
// cell, averaged over positive cells (zero when there are none).
template <typename T>
DetLossResult<T> det_loss(const DetOutputs<T>& outputs, const DetTargets& targets,
                          T alpha, T gamma);

template <typename T>
DetLossResult<T> det_loss(const DetOutputs<T>& outputs,
                          const std::vector<GroundTruthBox>& boxes, int patch_px,
                          T alpha, T gamma);

template <typename T>
inline T total_loss(T class_loss, T box_loss, T objectness_loss, T lambda) {
    return box_loss + class_loss + lambda * objectness_loss;
}

// Emits one detection per (cell, class) whose sigmoid score clears
// `keep_threshold`; boxes are decoded to patch pixels and clipped to it.
template <typename T>
std::vector<Detection> decode_detections(const DetOutputs<T>& outputs, int patch_px,
                                         double keep_threshold);

// Detection head on a backbone tap: 3x3 stride-1 stem, then 1x1 class and box
// branches. The grid equals the tap extent.
template <typename T>
struct DetHeadConfig {
    int tap_channels = 0;
    int tap_extent = 0;
    int num_classes = 0;
    int stem_channels = 64;
    T class_bias_init = T(-2);
};

template <typename T>
struct DetHeadCache {
    Tensor<T> tap;
    Tensor<T> stem_out;
    Tensor<T> stem_act;
};

template <typename T>
class DetHead {
public:
    DetHead() = default;
    DetHead(const DetHeadConfig<T>& cfg, Rng& rng);

    DetOutputs<T> forward(const Tensor<T>& tap, DetHeadCache<T>* cache = nullptr) const;
    Tensor<T> backward(const Tensor<T>& dlogits, const Tensor<T>& ddeltas,
                       const DetHeadCache<T>& cache);

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix);
    void zero_grads();
    int grid() const { return cfg_.tap_extent; }
    int num_classes() const { return cfg_.num_classes; }

    ConvLayer<T> stem, cls, box;

private:
    DetHeadConfig<T> cfg_;
};

} // namespace oandet
