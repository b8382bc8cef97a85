#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/detector.hpp"
#include "core/oan.hpp"
#include "core/sgd.hpp"

namespace oandet {

// Small strided backbone: each stage halves the spatial extent with a 3x3
// stride-2 conv and refines with a 3x3 stride-1 conv, relu after both. Stage
// i output extent is patch >> (i + 1).
template <typename T>
struct BackboneStageCache {
    Tensor<T> in;
    Tensor<T> reduce_out;
    Tensor<T> reduce_act;
    Tensor<T> refine_out;
    Tensor<T> refine_act;
};

template <typename T>
struct BackboneCache {
    std::vector<BackboneStageCache<T>> stages;
    ConvWorkspace<T> ws;
};

template <typename T>
class Backbone {
public:
    struct Stage {
        ConvLayer<T> reduce;
        ConvLayer<T> refine;
    };

    Backbone() = default;
    Backbone(int in_channels, const std::vector<int>& stage_channels, Rng& rng);

    // Fills `cache` and returns it; stage outputs live in stages[i].refine_act.
    void forward(const Tensor<T>& input, BackboneCache<T>& cache) const;

    // stage_grads[i] is the gradient flowing into stage i's output; empty
    // tensors mean zero. Returns the input gradient.
    Tensor<T> backward(const std::vector<Tensor<T>>& stage_grads, BackboneCache<T>& cache);

    void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix);
    void zero_grads();
    int num_stages() const { return static_cast<int>(stages_.size()); }
    Stage& stage(int i) { return stages_[static_cast<std::size_t>(i)]; }
    const Stage& stage(int i) const { return stages_[static_cast<std::size_t>(i)]; }

private:
    std::vector<Stage> stages_;
};

struct ModelConfig {
    int in_channels = 1;
    std::vector<int> stage_channels = {8, 16, 32, 64};
    int patch_size = 128;
    int stride = 104; // default tiling stride carried along for inference
    int grid_size = 8;
    int det_grid_size = 0; // 0 = tap extent of the detector stage
    int oan_tap = -1;      // stage index, -1 = last stage
    int det_tap = -1;
    int oan_mid_channels = 64;
    int oan_hidden_channels = 128;
    int det_stem_channels = 64;
    int num_classes = 3;
    double head_bias_init = -2.0;

    // Loss / gate / inference settings that travel with the checkpoint.
    double alpha = 0.25;
    double gamma = 2.0;
    double lambda = 4.0;
    double gate_k = 4.0;
    int stats_window = 2000;
    double keep_threshold = 0.05;
    double nms_iou = 0.1;

    void validate() const; // throws ValidationError naming the field
    int resolve_tap(int tap) const {
        return tap < 0 ? static_cast<int>(stage_channels.size()) - 1 : tap;
    }
    int stage_extent(int stage) const { return patch_size >> (stage + 1); }
    int resolved_det_grid() const {
        return det_grid_size > 0 ? det_grid_size : stage_extent(resolve_tap(det_tap));
    }
};

template <typename T>
struct ModelCache {
    BackboneCache<T> backbone;
    OanHeadCache<T> oan;
    DetHeadCache<T> det;
};

template <typename T>
class Model {
public:
    Model() = default;
    Model(const ModelConfig& cfg, std::uint64_t seed);

    // Backbone plus objectness head; this is the part that runs on every
    // patch regardless of gating.
    ActivationMap<T> forward_oan(const Tensor<T>& input, ModelCache<T>& cache) const;

    // Detection head on the cached backbone tap; valid after forward_oan.
    DetOutputs<T> forward_det(ModelCache<T>& cache) const;

    // Gradients for both heads flow into their taps and then jointly through
    // the backbone. Either head gradient may be null (treated as zero).
    void backward(const Tensor<T>* d_oan_logits, const Tensor<T>* d_cls,
                  const Tensor<T>* d_box, ModelCache<T>& cache);

    std::vector<ParamRef<T>> params();
    void zero_grads();
    std::size_t param_count();

    const ModelConfig& config() const { return cfg_; }

    Backbone<T> backbone;
    OanHead<T> oan_head;
    DetHead<T> det_head;

private:
    ModelConfig cfg_;
    int oan_tap_ = 0;
    int det_tap_ = 0;
};

// Checkpoint layout: "meta/..." scalars describing the architecture and the
// runtime settings, "param/..." weight tensors in registration order, and
// "stats/..." holding the rolling calibration statistics.
std::vector<CheckpointEntry> model_to_entries(Model<float>& model,
                                              const ThresholdStats& stats);

struct LoadedModel {
    Model<float> model;
    ThresholdStats stats{1};
    std::uint64_t checksum = 0;
    std::string path;
};

LoadedModel model_from_entries(const std::vector<CheckpointEntry>& entries,
                               const std::string& origin);

void save_model(const std::string& path, Model<float>& model,
                const ThresholdStats& stats);
LoadedModel load_model(const std::string& path);

} // namespace oandet
