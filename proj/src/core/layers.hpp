#pragma once

#include <cstddef>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace oandet {

struct ConvDims {
    int out_h = 0;
    int out_w = 0;
};

ConvDims conv_output_dims(int in_h, int in_w, int kernel, int stride, int padding);

// Scratch buffers for the im2col lowering, reusable across calls so the
// training loop does not reallocate per iteration.
template <typename T>
struct ConvWorkspace {
    std::vector<T> col;
    std::vector<T> dcol;
};

template <typename T>
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;

    Tensor<T> weight;      // [out, in, k, k]
    Tensor<T> bias;        // [out]
    Tensor<T> weight_grad;
    Tensor<T> bias_grad;

    ConvLayer() = default;
    ConvLayer(int in_ch, int out_ch, int kernel_size, int stride_len, int pad);

    // He-style init for relu stacks: N(0, sqrt(2 / fan_in)) weights plus a
    // constant bias (nonzero for heads that should start near "off").
    void init_he(Rng& rng, T bias_init = T(0));

    void zero_grads();
    std::size_t param_count() const { return weight.numel() + bias.numel(); }
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer,
                         ConvWorkspace<T>* ws = nullptr);

// Accumulates weight/bias gradients on the layer and returns the gradient
// with respect to the input.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& input, ConvLayer<T>& layer,
                          const Tensor<T>& upstream,
                          ConvWorkspace<T>* ws = nullptr);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& forward_input, const Tensor<T>& upstream);

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input);

// Takes the forward *output* y, since dy/dx = y * (1 - y).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& forward_output, const Tensor<T>& upstream);

// [N, C, H, W] -> [N, C*b*b, H/b, W/b]; spatial blocks become channels.
template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& input, int block);

template <typename T>
Tensor<T> space_to_depth_backward(const Tensor<T>& upstream, int block);

} // namespace oandet
