#include "core/oan.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace oandet {

namespace {

void check_grid_args(int patch_px, int grid) {
    if (patch_px <= 0) throw ValidationError("patch size must be positive");
    if (grid <= 0) throw ValidationError("grid size must be positive");
}

} // namespace

GridLabels assign_center(const std::vector<GroundTruthBox>& boxes, int patch_px,
                         int grid) {
    check_grid_args(patch_px, grid);
    GridLabels labels;
    labels.grid = grid;
    labels.target.assign(static_cast<std::size_t>(grid) * grid, 0);
    labels.ignore.assign(static_cast<std::size_t>(grid) * grid, 0);

    for (const GroundTruthBox& box : boxes) {
        const double cx = box.center_x();
        const double cy = box.center_y();
        if (cx < 0.0 || cx >= patch_px || cy < 0.0 || cy >= patch_px) {
            throw ValidationError("box center outside patch");
        }
        const int j = static_cast<int>(std::floor(cx * grid / patch_px));
        const int i = static_cast<int>(std::floor(cy * grid / patch_px));
        labels.target[static_cast<std::size_t>(i) * grid + j] = 1;
    }
    return labels;
}

GridLabels assign_iof(const std::vector<GroundTruthBox>& boxes, int patch_px,
                      int grid, double hi, double lo) {
    check_grid_args(patch_px, grid);
    if (!(lo >= 0.0) || !(hi > lo) || hi > 1.0) {
        throw ValidationError("iof thresholds must satisfy 0 <= lo < hi <= 1");
    }
    GridLabels labels;
    labels.grid = grid;
    labels.target.assign(static_cast<std::size_t>(grid) * grid, 0);
    labels.ignore.assign(static_cast<std::size_t>(grid) * grid, 0);

    const double cell = static_cast<double>(patch_px) / grid;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const BoxF cell_box{j * cell, i * cell, (j + 1) * cell, (i + 1) * cell};
            double best = 0.0;
            for (const GroundTruthBox& box : boxes) {
                const double inter = intersection_area(cell_box, to_boxf(box));
                best = std::max(best, inter / cell_box.area());
            }
            const std::size_t idx = static_cast<std::size_t>(i) * grid + j;
            if (best >= hi) {
                labels.target[idx] = 1;
            } else if (best >= lo) {
                labels.ignore[idx] = 1;
            }
        }
    }
    return labels;
}

template <typename T>
OanHead<T>::OanHead(const OanHeadConfig<T>& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.grid <= 0) throw ValidationError("oan grid must be positive");
    if (cfg.tap_extent == cfg.grid) {
        factor_ = 1;
    } else if (cfg.tap_extent == 2 * cfg.grid) {
        factor_ = 2;
    } else if (cfg.tap_extent == 4 * cfg.grid) {
        factor_ = 4;
    } else {
        throw ShapeError("oan tap extent " + std::to_string(cfg.tap_extent) +
                         " must be 1x, 2x or 4x the grid " +
                         std::to_string(cfg.grid));
    }
    const int stem_stride = factor_ == 1 ? 1 : 2;
    stem = ConvLayer<T>(cfg.tap_channels, cfg.mid_channels, 3, stem_stride, 1);
    const int mid_in = factor_ == 4 ? cfg.mid_channels * 4 : cfg.mid_channels;
    mid = ConvLayer<T>(mid_in, cfg.hidden_channels, 1, 1, 0);
    out = ConvLayer<T>(cfg.hidden_channels, 1, 1, 1, 0);
    stem.init_he(rng);
    mid.init_he(rng);
    // Bias the output toward "no object" so early maps are not saturated.
    out.init_he(rng, cfg.output_bias_init);
}

template <typename T>
ActivationMap<T> OanHead<T>::forward(const Tensor<T>& tap, double patch_px,
                                     OanHeadCache<T>* cache) const {
    if (tap.rank() != 4 || tap.dim(2) != cfg_.tap_extent || tap.dim(3) != cfg_.tap_extent) {
        throw ShapeError("oan tap shape " + shape_string(tap.shape) + ", expected extent " +
                         std::to_string(cfg_.tap_extent));
    }
    OanHeadCache<T> local;
    OanHeadCache<T>& c = cache ? *cache : local;

    c.tap = tap;
    c.stem_out = conv2d_forward(tap, stem);
    c.stem_act = relu_forward(c.stem_out);
    const Tensor<T>* mid_in = &c.stem_act;
    if (factor_ == 4) {
        c.folded = space_to_depth(c.stem_act, 2);
        mid_in = &c.folded;
    }
    c.mid_out = conv2d_forward(*mid_in, mid);
    c.mid_act = relu_forward(c.mid_out);

    ActivationMap<T> map;
    map.grid = cfg_.grid;
    map.cell_px = patch_px / cfg_.grid;
    map.logits = conv2d_forward(c.mid_act, out);
    map.probs = sigmoid_forward(map.logits);
    return map;
}

template <typename T>
Tensor<T> OanHead<T>::backward(const Tensor<T>& upstream_logits,
                               const OanHeadCache<T>& cache) {
    Tensor<T> d_mid_act = conv2d_backward(cache.mid_act, out, upstream_logits);
    Tensor<T> d_mid_out = relu_backward(cache.mid_out, d_mid_act);
    const Tensor<T>& mid_in = factor_ == 4 ? cache.folded : cache.stem_act;
    Tensor<T> d_mid_in = conv2d_backward(mid_in, mid, d_mid_out);
    Tensor<T> d_stem_act =
        factor_ == 4 ? space_to_depth_backward(d_mid_in, 2) : std::move(d_mid_in);
    Tensor<T> d_stem_out = relu_backward(cache.stem_out, d_stem_act);
    return conv2d_backward(cache.tap, stem, d_stem_out);
}

template <typename T>
void OanHead<T>::collect_params(std::vector<ParamRef<T>>& params,
                                const std::string& prefix) {
    params.push_back({prefix + "/stem/weight", &stem.weight, &stem.weight_grad});
    params.push_back({prefix + "/stem/bias", &stem.bias, &stem.bias_grad});
    params.push_back({prefix + "/mid/weight", &mid.weight, &mid.weight_grad});
    params.push_back({prefix + "/mid/bias", &mid.bias, &mid.bias_grad});
    params.push_back({prefix + "/out/weight", &out.weight, &out.weight_grad});
    params.push_back({prefix + "/out/bias", &out.bias, &out.bias_grad});
}

template <typename T>
void OanHead<T>::zero_grads() {
    stem.zero_grads();
    mid.zero_grads();
    out.zero_grads();
}

template <typename T>
OanLossResult<T> oan_loss(const ActivationMap<T>& map, const GridLabels& labels,
                          T alpha, T gamma) {
    if (labels.grid != map.grid) {
        throw ShapeError("activation map grid " + std::to_string(map.grid) +
                         " does not match labels grid " + std::to_string(labels.grid));
    }
    const LossGrad<T> focal =
        focal_loss(map.probs, labels.target, labels.ignore, alpha, gamma);

    OanLossResult<T> result;
    result.value = focal.value;
    result.dlogits = Tensor<T>(map.logits.shape);
    for (std::size_t i = 0; i < map.probs.numel(); ++i) {
        const T p = map.probs.values[i];
        result.dlogits.values[i] = focal.grad.values[i] * p * (T(1) - p);
    }
    return result;
}

ThresholdStats::ThresholdStats(std::size_t window) : window_(window) {
    if (window == 0) throw ValidationError("stats window must be positive");
    max_.reserve(window);
    std_.reserve(window);
}

void ThresholdStats::record(double max_prob, double std_prob) {
    if (full_) {
        max_[head_] = max_prob;
        std_[head_] = std_prob;
        head_ = (head_ + 1) % window_;
        return;
    }
    max_.push_back(max_prob);
    std_.push_back(std_prob);
    ++head_;
    if (head_ == window_) {
        full_ = true;
        head_ = 0;
    }
}

std::vector<double> ThresholdStats::max_values() const {
    if (!full_) return max_;
    std::vector<double> out;
    out.reserve(window_);
    for (std::size_t i = 0; i < window_; ++i) out.push_back(max_[(head_ + i) % window_]);
    return out;
}

std::vector<double> ThresholdStats::std_values() const {
    if (!full_) return std_;
    std::vector<double> out;
    out.reserve(window_);
    for (std::size_t i = 0; i < window_; ++i) out.push_back(std_[(head_ + i) % window_]);
    return out;
}

double ThresholdStats::mean_max() const {
    double sum = 0.0;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) sum += max_[i];
    return n ? sum / static_cast<double>(n) : 0.0;
}

double ThresholdStats::mean_std() const {
    double sum = 0.0;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) sum += std_[i];
    return n ? sum / static_cast<double>(n) : 0.0;
}

template <typename T>
MapStats activation_stats(const Tensor<T>& probs) {
    if (probs.numel() == 0) throw ShapeError("activation stats on empty tensor");
    MapStats s;
    double sum = 0.0;
    for (T v : probs.values) {
        const double p = static_cast<double>(v);
        s.max = std::max(s.max, p);
        sum += p;
    }
    const double mean = sum / static_cast<double>(probs.numel());
    double var = 0.0;
    for (T v : probs.values) {
        const double d = static_cast<double>(v) - mean;
        var += d * d;
    }
    s.stddev = std::sqrt(var / static_cast<double>(probs.numel()));
    return s;
}

CalibrationResult calibrate_threshold(const ThresholdStats& stats, double k) {
    if (stats.size() == 0) {
        throw CalibrationError("cannot calibrate threshold: no recorded statistics");
    }
    if (!(k > 0.0)) throw ValidationError("calibration k must be positive");
    CalibrationResult r;
    r.m = stats.mean_max();
    r.v = stats.mean_std();
    r.k = k;
    r.window = stats.size();
    const double s = r.m + r.v;
    r.threshold = s * s / k;
    return r;
}

template <typename T>
GateDecision gate(const ActivationMap<T>& map, double threshold) {
    GateDecision d;
    d.confidence = map.max_prob();
    d.threshold = threshold;
    d.passed = d.confidence > threshold;
    return d;
}

template struct OanHeadConfig<float>;
template struct OanHeadConfig<double>;
template class OanHead<float>;
template class OanHead<double>;
template OanLossResult<float> oan_loss(const ActivationMap<float>&, const GridLabels&, float, float);
template OanLossResult<double> oan_loss(const ActivationMap<double>&, const GridLabels&, double, double);
template MapStats activation_stats(const Tensor<float>&);
template MapStats activation_stats(const Tensor<double>&);
template GateDecision gate(const ActivationMap<float>&, double);
template GateDecision gate(const ActivationMap<double>&, double);

} // namespace oandet
