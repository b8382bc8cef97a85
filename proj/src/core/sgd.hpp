#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace oandet {

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    // The rate is multiplied by decay_factor once per listed epoch, starting
    // when that epoch begins (epochs are 0-indexed).
    std::vector<int> decay_epochs = {8, 11};
    double decay_factor = 0.1;
    int epochs = 12;
};

inline double effective_lr(const SgdConfig& cfg, int epoch) {
    double lr = cfg.learning_rate;
    for (int d : cfg.decay_epochs) {
        if (epoch >= d) lr *= cfg.decay_factor;
    }
    return lr;
}

// A named view of one parameter tensor and its gradient accumulator. Modules
// expose their parameters through this so the optimizer and the checkpoint
// writer see a single flat list in a stable order.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;
};

// Classic momentum: v = mu * v + g; p -= lr * v.
template <typename T>
class SgdOptimizer {
public:
    void step(const std::vector<ParamRef<T>>& params, const SgdConfig& cfg, int epoch) {
        if (velocity_.empty()) {
            velocity_.reserve(params.size());
            for (const auto& p : params) velocity_.emplace_back(p.value->shape);
        }
        if (velocity_.size() != params.size()) {
            throw ShapeError("optimizer state does not match parameter list");
        }
        const T lr = static_cast<T>(effective_lr(cfg, epoch));
        const T mu = static_cast<T>(cfg.momentum);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& v = velocity_[i];
            Tensor<T>& p = *params[i].value;
            const Tensor<T>& g = *params[i].grad;
            if (!v.same_shape(p) || !g.same_shape(p)) {
                throw ShapeError("optimizer shape mismatch for " + params[i].name);
            }
            for (std::size_t j = 0; j < p.numel(); ++j) {
                v.values[j] = mu * v.values[j] + g.values[j];
                p.values[j] -= lr * v.values[j];
            }
        }
    }

private:
    std::vector<Tensor<T>> velocity_;
};

} // namespace oandet
