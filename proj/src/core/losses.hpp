#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace oandet {

template <typename T>
struct LossGrad {
    T value = T(0);
    Tensor<T> grad;
};

// Binary focal loss on probabilities, averaged over every element of `prob`
// (ignored elements still count in the denominator but contribute zero).
//   target 1:  -alpha * (1 - p)^gamma * log(p)
//   target 0:  -(1 - alpha) * p^gamma * log(1 - p)
// Probabilities are clamped to [1e-6, 1 - 1e-6] before the log; the gradient
// is taken with respect to the raw (unclamped) probability and is zero in the
// clamped regime. `ignore` may be empty (nothing ignored).
template <typename T>
LossGrad<T> focal_loss(const Tensor<T>& prob, const std::vector<std::uint8_t>& target,
                       const std::vector<std::uint8_t>& ignore, T alpha, T gamma);

template <typename T>
inline T smooth_l1(T diff) {
    const T a = diff < T(0) ? -diff : diff;
    return a < T(1) ? T(0.5) * diff * diff : a - T(0.5);
}

template <typename T>
inline T smooth_l1_grad(T diff) {
    if (diff > T(1)) return T(1);
    if (diff < T(-1)) return T(-1);
    return diff;
}

} // namespace oandet
