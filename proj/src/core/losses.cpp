#include "core/losses.hpp"

#include <cmath>

namespace oandet {

template <typename T>
LossGrad<T> focal_loss(const Tensor<T>& prob, const std::vector<std::uint8_t>& target,
                       const std::vector<std::uint8_t>& ignore, T alpha, T gamma) {
    const std::size_t n = prob.numel();
    if (target.size() != n) {
        throw ShapeError("focal loss target size " + std::to_string(target.size()) +
                         " does not match " + std::to_string(n) + " probabilities");
    }
    if (!ignore.empty() && ignore.size() != n) {
        throw ShapeError("focal loss ignore mask size mismatch");
    }
    if (n == 0) throw ShapeError("focal loss on empty tensor");

    constexpr double kEps = 1e-6;
    LossGrad<T> out;
    out.grad = Tensor<T>(prob.shape);

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ignore.empty() && ignore[i]) continue;
        const double p_raw = static_cast<double>(prob.values[i]);
        if (std::isnan(p_raw)) throw NumericError("focal loss saw NaN probability");
        const bool clamped = p_raw < kEps || p_raw > 1.0 - kEps;
        const double p = std::min(std::max(p_raw, kEps), 1.0 - kEps);
        double g = 0.0;
        if (target[i]) {
            const double q = 1.0 - p;
            const double pg = std::pow(q, static_cast<double>(gamma));
            sum += -static_cast<double>(alpha) * pg * std::log(p);
            if (!clamped) {
                // d/dp [-a (1-p)^g ln p] = a g (1-p)^(g-1) ln p - a (1-p)^g / p
                const double pg1 = std::pow(q, static_cast<double>(gamma) - 1.0);
                g = static_cast<double>(alpha) *
                    (static_cast<double>(gamma) * pg1 * std::log(p) - pg / p);
            }
        } else {
            const double pg = std::pow(p, static_cast<double>(gamma));
            sum += -(1.0 - static_cast<double>(alpha)) * pg * std::log(1.0 - p);
            if (!clamped) {
                const double pg1 = std::pow(p, static_cast<double>(gamma) - 1.0);
                g = (1.0 - static_cast<double>(alpha)) *
                    (-static_cast<double>(gamma) * pg1 * std::log(1.0 - p) + pg / (1.0 - p));
            }
        }
        out.grad.values[i] = static_cast<T>(g / static_cast<double>(n));
    }
    out.value = static_cast<T>(sum / static_cast<double>(n));
    return out;
}

template LossGrad<float> focal_loss(const Tensor<float>&, const std::vector<std::uint8_t>&,
                                    const std::vector<std::uint8_t>&, float, float);
template LossGrad<double> focal_loss(const Tensor<double>&, const std::vector<std::uint8_t>&,
                                     const std::vector<std::uint8_t>&, double, double);

} // namespace oandet
