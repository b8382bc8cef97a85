#include "core/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "core/errors.hpp"

namespace oandet {

namespace {

struct PreparedSample {
    const PatchSample* patch;
    GridLabels oan_labels;
    DetTargets det_targets;
};

void fill_input(const PatchSample& patch, Tensor<float>& input) {
    for (std::size_t i = 0; i < patch.raster.size(); ++i) {
        input.values[i] = static_cast<float>(patch.raster[i]) / 255.0f;
    }
}

// Legitimate per-patch totals stay within a few hundred for normalized
// inputs; a loss beyond this is a runaway step even when saturation keeps
// it technically finite.
constexpr float kDivergedLoss = 1e12f;

} // namespace

TrainResult train_model(Model<float>& model, const std::vector<PatchSample>& patches,
                        const TrainConfig& cfg, std::uint64_t seed) {
    const ModelConfig& mc = model.config();
    if (cfg.sgd.epochs <= 0) throw ValidationError("training needs epochs >= 1");

    std::vector<PreparedSample> samples;
    samples.reserve(patches.size());
    for (const PatchSample& patch : patches) {
        if (!cfg.include_empty_patches && patch.boxes.empty()) continue;
        if (patch.patch != mc.patch_size) {
            throw ValidationError("patch size does not match the model input");
        }
        PreparedSample s;
        s.patch = &patch;
        s.oan_labels = cfg.assignment == Assignment::kCenter
                           ? assign_center(patch.boxes, mc.patch_size, mc.grid_size)
                           : assign_iof(patch.boxes, mc.patch_size, mc.grid_size,
                                        cfg.iof_hi, cfg.iof_lo);
        s.det_targets = build_det_targets(patch.boxes, mc.patch_size,
                                          mc.resolved_det_grid(), mc.num_classes);
        samples.push_back(std::move(s));
    }
    if (samples.empty()) {
        throw ValidationError("training set is empty (no usable patches)");
    }

    TrainResult result;
    result.stats = ThresholdStats(static_cast<std::size_t>(mc.stats_window));

    Rng shuffle_rng(Rng::mix(seed, 0x7261696e)); // independent of init stream
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Tensor<float> input({1, mc.in_channels, mc.patch_size, mc.patch_size});
    ModelCache<float> cache;
    SgdOptimizer<float> optimizer;
    std::vector<ParamRef<float>> params = model.params();

    const auto alpha = static_cast<float>(mc.alpha);
    const auto gamma = static_cast<float>(mc.gamma);
    const auto lambda = static_cast<float>(mc.lambda);

    for (int epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
        // Fisher-Yates with the run's own stream, so visit order is seeded.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(shuffle_rng.next_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        EpochLog log;
        log.epoch = epoch;
        log.learning_rate = effective_lr(cfg.sgd, epoch);

        for (std::size_t idx : order) {
            const PreparedSample& s = samples[idx];
            fill_input(*s.patch, input);

            const ActivationMap<float> map = model.forward_oan(input, cache);
            const MapStats stats = activation_stats(map.probs);
            result.stats.record(stats.max, stats.stddev);

            const OanLossResult<float> oan = oan_loss(map, s.oan_labels, alpha, gamma);
            const DetOutputs<float> det = model.forward_det(cache);
            const DetLossResult<float> dl = det_loss(det, s.det_targets, alpha, gamma);

            const float total = total_loss(dl.class_loss, dl.box_loss, oan.value, lambda);
            if (!std::isfinite(total) || total > kDivergedLoss) {
                char buf[96];
                std::snprintf(buf, sizeof(buf),
                              "training diverged: loss %.3g at iteration %llu",
                              static_cast<double>(total),
                              static_cast<unsigned long long>(result.iterations));
                throw NumericError(buf);
            }

            Tensor<float> d_oan(oan.dlogits.shape);
            for (std::size_t i = 0; i < d_oan.numel(); ++i) {
                d_oan.values[i] = lambda * oan.dlogits.values[i];
            }

            model.zero_grads();
            model.backward(&d_oan, &dl.dlogits, &dl.ddeltas, cache);
            optimizer.step(params, cfg.sgd, epoch);

            ++result.iterations;
            log.mean_total += total;
            log.mean_class += dl.class_loss;
            log.mean_box += dl.box_loss;
            log.mean_objectness += oan.value;
        }

        const double n = static_cast<double>(order.size());
        log.mean_total /= n;
        log.mean_class /= n;
        log.mean_box /= n;
        log.mean_objectness /= n;
        result.epochs.push_back(log);
    }
    return result;
}

} // namespace oandet
