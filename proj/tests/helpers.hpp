#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "core/model.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"
#include "core/tensor.hpp"

namespace testutil {

inline std::filesystem::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const int id = counter.fetch_add(1);
    std::filesystem::path p = std::filesystem::temp_directory_path() /
                              ("oandet_" + tag + "_" + std::to_string(::getpid()) + "_" +
                               std::to_string(id));
    std::filesystem::create_directories(p);
    return p;
}

template <typename T>
oandet::Tensor<T> random_tensor(const std::vector<int>& shape, oandet::Rng& rng,
                                double scale = 1.0) {
    oandet::Tensor<T> t(shape);
    for (T& v : t.values) {
        v = static_cast<T>((rng.next_double() * 2.0 - 1.0) * scale);
    }
    return t;
}

// Fixed pseudo-random projection so any tensor output reduces to a scalar
// with nonzero gradient everywhere.
template <typename T>
std::vector<double> projection_weights(std::size_t n, oandet::Rng& rng) {
    std::vector<double> w(n);
    for (double& v : w) v = rng.next_double() * 2.0 - 1.0;
    (void)sizeof(T);
    return w;
}

template <typename T>
double weighted_sum(const oandet::Tensor<T>& t, const std::vector<double>& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        acc += static_cast<double>(t.values[i]) * w[i];
    }
    return acc;
}

template <typename T>
oandet::Tensor<T> as_grad(const std::vector<double>& w, const std::vector<int>& shape) {
    oandet::Tensor<T> g(shape);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<T>(w[i]);
    return g;
}

// Fresh layers start with zero biases, which parks every dead relu unit
// exactly on its kink. Losses are not differentiable there, so finite
// difference probes would read a one-sided slope no matter how small the
// step. Shifting each bias off zero guarantees a clean step exists.
template <typename T>
void nudge_biases(const std::vector<oandet::ParamRef<T>>& params, oandet::Rng& rng) {
    for (const oandet::ParamRef<T>& p : params) {
        if (p.name.find("bias") == std::string::npos) continue;
        for (T& v : p.value->values) {
            v += static_cast<T>((rng.next_double() < 0.5 ? -1.0 : 1.0) *
                                rng.next_range(0.05, 0.15));
        }
    }
}

// True when any entry changes sign between the two tensors, meaning a relu
// kink sits inside the probe window that produced them.
template <typename T>
bool sign_crossed(const oandet::Tensor<T>& plus, const oandet::Tensor<T>& minus) {
    for (std::size_t i = 0; i < plus.values.size(); ++i) {
        if ((plus.values[i] > T(0)) != (minus.values[i] > T(0))) return true;
    }
    return false;
}

// Small geometry that still exercises every stage type: 32px patches over a
// two stage backbone, 8x8 activation grid.
inline oandet::ModelConfig tiny_model_config() {
    oandet::ModelConfig cfg;
    cfg.patch_size = 32;
    cfg.stride = 24;
    cfg.grid_size = 8;
    cfg.det_grid_size = 8;
    cfg.stage_channels = {4, 6};
    cfg.oan_mid_channels = 4;
    cfg.oan_hidden_channels = 6;
    cfg.det_stem_channels = 6;
    cfg.num_classes = 3;
    return cfg;
}

inline oandet::SceneSpec tiny_scene_spec() {
    oandet::SceneSpec spec;
    spec.width = 96;
    spec.height = 96;
    spec.num_clusters = 2;
    spec.objects_per_cluster = {2, 4};
    spec.cluster_radius = 18.0;
    spec.object_size = {{4.0, 8.0}, {5.0, 9.0}, {6.0, 10.0}};
    spec.num_classes = 3;
    spec.background_noise_sigma = 6.0;
    return spec;
}

} // namespace testutil
