#include "core/detector.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/losses.hpp"

namespace oandet {

std::array<double, 4> encode_box(const GroundTruthBox& box, int patch_px, int grid) {
    const double cell = static_cast<double>(patch_px) / grid;
    const double cx = box.center_x();
    const double cy = box.center_y();
    const int j = static_cast<int>(std::floor(cx / cell));
    const int i = static_cast<int>(std::floor(cy / cell));
    return {cx / cell - j, cy / cell - i, std::log(box.width() / cell),
            std::log(box.height() / cell)};
}

DetTargets build_det_targets(const std::vector<GroundTruthBox>& boxes, int patch_px,
                             int grid, int num_classes) {
    if (grid <= 0 || num_classes <= 0 || patch_px <= 0) {
        throw ValidationError("detector targets need positive grid, classes and patch");
    }
    DetTargets t;
    t.grid = grid;
    t.num_classes = num_classes;
    t.class_target.assign(static_cast<std::size_t>(num_classes) * grid * grid, 0);
    t.positive.assign(static_cast<std::size_t>(grid) * grid, 0);
    t.deltas.assign(static_cast<std::size_t>(grid) * grid, {0.0, 0.0, 0.0, 0.0});

    const double cell = static_cast<double>(patch_px) / grid;
    for (const GroundTruthBox& box : boxes) {
        if (box.class_id < 0 || box.class_id >= num_classes) {
            throw ValidationError("box class_id " + std::to_string(box.class_id) +
                                  " out of range");
        }
        if (!box.valid()) throw ValidationError("degenerate box in detector targets");
        const double cx = box.center_x();
        const double cy = box.center_y();
        if (cx < 0.0 || cx >= patch_px || cy < 0.0 || cy >= patch_px) {
            throw ValidationError("box center outside patch");
        }
        const int j = static_cast<int>(std::floor(cx / cell));
        const int i = static_cast<int>(std::floor(cy / cell));
        const std::size_t cell_idx = static_cast<std::size_t>(i) * grid + j;
        if (t.positive[cell_idx]) continue; // first box owns the cell
        t.positive[cell_idx] = 1;
        t.class_target[(static_cast<std::size_t>(box.class_id) * grid + i) * grid + j] = 1;
        t.deltas[cell_idx] = encode_box(box, patch_px, grid);
    }
    return t;
}

template <typename T>
DetLossResult<T> det_loss(const DetOutputs<T>& outputs, const DetTargets& targets,
                          T alpha, T gamma) {
    if (outputs.grid != targets.grid || outputs.num_classes != targets.num_classes) {
        throw ShapeError("detector outputs and targets disagree on grid or classes");
    }
    const int S = outputs.grid;
    require_shape(outputs.class_logits, {1, outputs.num_classes, S, S},
                  "detector class logits");
    require_shape(outputs.box_deltas, {1, 4, S, S}, "detector box deltas");

    DetLossResult<T> result;

    const Tensor<T> probs = sigmoid_forward(outputs.class_logits);
    const LossGrad<T> focal = focal_loss(probs, targets.class_target, {}, alpha, gamma);
    result.class_loss = focal.value;
    result.dlogits = Tensor<T>(outputs.class_logits.shape);
    for (std::size_t i = 0; i < probs.numel(); ++i) {
        const T p = probs.values[i];
        result.dlogits.values[i] = focal.grad.values[i] * p * (T(1) - p);
    }

    result.ddeltas = Tensor<T>(outputs.box_deltas.shape);
    int positives = 0;
    for (std::uint8_t p : targets.positive) positives += p;
    double box_sum = 0.0;
    if (positives > 0) {
        for (int i = 0; i < S; ++i) {
            for (int j = 0; j < S; ++j) {
                const std::size_t cell_idx = static_cast<std::size_t>(i) * S + j;
                if (!targets.positive[cell_idx]) continue;
                for (int d = 0; d < 4; ++d) {
                    const T pred = outputs.box_deltas.at4(0, d, i, j);
                    const T diff =
                        pred - static_cast<T>(targets.deltas[cell_idx][d]);
                    box_sum += static_cast<double>(smooth_l1(diff));
                    result.ddeltas.at4(0, d, i, j) =
                        smooth_l1_grad(diff) / static_cast<T>(positives);
                }
            }
        }
        box_sum /= positives;
    }
    result.box_loss = static_cast<T>(box_sum);
    return result;
}

template <typename T>
DetLossResult<T> det_loss(const DetOutputs<T>& outputs,
                          const std::vector<GroundTruthBox>& boxes, int patch_px,
                          T alpha, T gamma) {
    return det_loss(outputs,
                    build_det_targets(boxes, patch_px, outputs.grid, outputs.num_classes),
                    alpha, gamma);
}

template <typename T>
std::vector<Detection> decode_detections(const DetOutputs<T>& outputs, int patch_px,
                                         double keep_threshold) {
    const int S = outputs.grid;
    const double cell = static_cast<double>(patch_px) / S;
    const Tensor<T> probs = sigmoid_forward(outputs.class_logits);

    std::vector<Detection> dets;
    for (int i = 0; i < S; ++i) {
        for (int j = 0; j < S; ++j) {
            const double tx = static_cast<double>(outputs.box_deltas.at4(0, 0, i, j));
            const double ty = static_cast<double>(outputs.box_deltas.at4(0, 1, i, j));
            const double tw = static_cast<double>(outputs.box_deltas.at4(0, 2, i, j));
            const double th = static_cast<double>(outputs.box_deltas.at4(0, 3, i, j));
            const double cx = (j + tx) * cell;
            const double cy = (i + ty) * cell;
            const double w = cell * std::exp(tw);
            const double h = cell * std::exp(th);
            for (int c = 0; c < outputs.num_classes; ++c) {
                const double score = static_cast<double>(probs.at4(0, c, i, j));
                if (score <= keep_threshold) continue;
                Detection det;
                det.class_id = c;
                det.score = score;
                det.box.x_min = std::max(0.0, cx - 0.5 * w);
                det.box.y_min = std::max(0.0, cy - 0.5 * h);
                det.box.x_max = std::min(static_cast<double>(patch_px), cx + 0.5 * w);
                det.box.y_max = std::min(static_cast<double>(patch_px), cy + 0.5 * h);
                if (det.box.x_max <= det.box.x_min || det.box.y_max <= det.box.y_min) {
                    continue;
                }
                dets.push_back(det);
            }
        }
    }
    return dets;
}

template <typename T>
DetHead<T>::DetHead(const DetHeadConfig<T>& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.tap_extent <= 0) throw ValidationError("detector tap extent must be positive");
    if (cfg.num_classes <= 0) throw ValidationError("detector needs at least one class");
    stem = ConvLayer<T>(cfg.tap_channels, cfg.stem_channels, 3, 1, 1);
    cls = ConvLayer<T>(cfg.stem_channels, cfg.num_classes, 1, 1, 0);
    box = ConvLayer<T>(cfg.stem_channels, 4, 1, 1, 0);
    stem.init_he(rng);
    cls.init_he(rng, cfg.class_bias_init);
    box.init_he(rng);
}

template <typename T>
DetOutputs<T> DetHead<T>::forward(const Tensor<T>& tap, DetHeadCache<T>* cache) const {
    if (tap.rank() != 4 || tap.dim(2) != cfg_.tap_extent || tap.dim(3) != cfg_.tap_extent) {
        throw ShapeError("detector tap shape " + shape_string(tap.shape) +
                         ", expected extent " + std::to_string(cfg_.tap_extent));
    }
    DetHeadCache<T> local;
    DetHeadCache<T>& c = cache ? *cache : local;
    c.tap = tap;
    c.stem_out = conv2d_forward(tap, stem);
    c.stem_act = relu_forward(c.stem_out);

    DetOutputs<T> out;
    out.grid = cfg_.tap_extent;
    out.num_classes = cfg_.num_classes;
    out.class_logits = conv2d_forward(c.stem_act, cls);
    out.box_deltas = conv2d_forward(c.stem_act, box);
    return out;
}

template <typename T>
Tensor<T> DetHead<T>::backward(const Tensor<T>& dlogits, const Tensor<T>& ddeltas,
                               const DetHeadCache<T>& cache) {
    Tensor<T> d_stem_act = conv2d_backward(cache.stem_act, cls, dlogits);
    const Tensor<T> d_stem_box = conv2d_backward(cache.stem_act, box, ddeltas);
    for (std::size_t i = 0; i < d_stem_act.numel(); ++i) {
        d_stem_act.values[i] += d_stem_box.values[i];
    }
    const Tensor<T> d_stem_out = relu_backward(cache.stem_out, d_stem_act);
    return conv2d_backward(cache.tap, stem, d_stem_out);
}

template <typename T>
void DetHead<T>::collect_params(std::vector<ParamRef<T>>& params,
                                const std::string& prefix) {
    params.push_back({prefix + "/stem/weight", &stem.weight, &stem.weight_grad});
    params.push_back({prefix + "/stem/bias", &stem.bias, &stem.bias_grad});
    params.push_back({prefix + "/cls/weight", &cls.weight, &cls.weight_grad});
    params.push_back({prefix + "/cls/bias", &cls.bias, &cls.bias_grad});
    params.push_back({prefix + "/box/weight", &box.weight, &box.weight_grad});
    params.push_back({prefix + "/box/bias", &box.bias, &box.bias_grad});
}

template <typename T>
void DetHead<T>::zero_grads() {
    stem.zero_grads();
    cls.zero_grads();
    box.zero_grads();
}

template struct DetOutputs<float>;
template struct DetOutputs<double>;
template class DetHead<float>;
template class DetHead<double>;
template DetLossResult<float> det_loss(const DetOutputs<float>&, const DetTargets&, float, float);
template DetLossResult<double> det_loss(const DetOutputs<double>&, const DetTargets&, double, double);
template DetLossResult<float> det_loss(const DetOutputs<float>&, const std::vector<GroundTruthBox>&, int, float, float);
template DetLossResult<double> det_loss(const DetOutputs<double>&, const std::vector<GroundTruthBox>&, int, double, double);
template std::vector<Detection> decode_detections(const DetOutputs<float>&, int, double);
template std::vector<Detection> decode_detections(const DetOutputs<double>&, int, double);

} // namespace oandet
