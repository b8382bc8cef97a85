#include "core/layers.hpp"

#include <cmath>
#include <cstring>

namespace oandet {

ConvDims conv_output_dims(int in_h, int in_w, int kernel, int stride, int padding) {
    if (in_h + 2 * padding < kernel || in_w + 2 * padding < kernel) {
        throw ShapeError("conv input " + std::to_string(in_h) + "x" +
                         std::to_string(in_w) + " smaller than kernel " +
                         std::to_string(kernel) + " with padding " +
                         std::to_string(padding));
    }
    ConvDims d;
    d.out_h = (in_h + 2 * padding - kernel) / stride + 1;
    d.out_w = (in_w + 2 * padding - kernel) / stride + 1;
    return d;
}

template <typename T>
ConvLayer<T>::ConvLayer(int in_ch, int out_ch, int kernel_size, int stride_len, int pad)
    : in_channels(in_ch),
      out_channels(out_ch),
      kernel(kernel_size),
      stride(stride_len),
      padding(pad) {
    if (in_ch <= 0 || out_ch <= 0) throw ShapeError("conv channels must be positive");
    if (kernel_size <= 0 || stride_len <= 0 || pad < 0) {
        throw ShapeError("bad conv geometry");
    }
    weight = Tensor<T>({out_ch, in_ch, kernel_size, kernel_size});
    bias = Tensor<T>({out_ch});
    weight_grad = Tensor<T>({out_ch, in_ch, kernel_size, kernel_size});
    bias_grad = Tensor<T>({out_ch});
}

template <typename T>
void ConvLayer<T>::init_he(Rng& rng, T bias_init) {
    const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (T& w : weight.values) w = static_cast<T>(std_dev * rng.next_normal());
    for (T& b : bias.values) b = bias_init;
}

template <typename T>
void ConvLayer<T>::zero_grads() {
    weight_grad.fill(T(0));
    bias_grad.fill(T(0));
}

namespace {

// Lowers one image of the batch to a [C*k*k, out_h*out_w] matrix. Out-of-range
// taps (from padding) become zeros.
template <typename T>
void im2col(const T* x, int channels, int in_h, int in_w, int kernel, int stride,
            int padding, int out_h, int out_w, T* col) {
    const int spatial = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < kernel; ++ki) {
            for (int kj = 0; kj < kernel; ++kj) {
                T* row = col + (static_cast<std::size_t>(c) * kernel * kernel +
                                static_cast<std::size_t>(ki) * kernel + kj) *
                                   spatial;
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ih = oh * stride - padding + ki;
                    if (ih < 0 || ih >= in_h) {
                        std::memset(row + static_cast<std::size_t>(oh) * out_w, 0,
                                    sizeof(T) * static_cast<std::size_t>(out_w));
                        continue;
                    }
                    const T* src = x + (static_cast<std::size_t>(c) * in_h + ih) * in_w;
                    T* dst = row + static_cast<std::size_t>(oh) * out_w;
                    for (int ow = 0; ow < out_w; ++ow) {
                        const int iw = ow * stride - padding + kj;
                        dst[ow] = (iw >= 0 && iw < in_w) ? src[iw] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, int channels, int in_h, int in_w, int kernel, int stride,
            int padding, int out_h, int out_w, T* x) {
    const int spatial = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < kernel; ++ki) {
            for (int kj = 0; kj < kernel; ++kj) {
                const T* row = col + (static_cast<std::size_t>(c) * kernel * kernel +
                                      static_cast<std::size_t>(ki) * kernel + kj) *
                                         spatial;
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ih = oh * stride - padding + ki;
                    if (ih < 0 || ih >= in_h) continue;
                    T* dst = x + (static_cast<std::size_t>(c) * in_h + ih) * in_w;
                    const T* src = row + static_cast<std::size_t>(oh) * out_w;
                    for (int ow = 0; ow < out_w; ++ow) {
                        const int iw = ow * stride - padding + kj;
                        if (iw >= 0 && iw < in_w) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

// C[m, :] += A[m, k] * B[k, :], the axpy ordering that keeps all three
// operands streaming. C must be pre-filled (bias or zeros).
template <typename T>
void gemm_accumulate(int rows, int cols, int inner, const T* a, const T* b, T* c) {
    for (int m = 0; m < rows; ++m) {
        T* crow = c + static_cast<std::size_t>(m) * cols;
        const T* arow = a + static_cast<std::size_t>(m) * inner;
        for (int k = 0; k < inner; ++k) {
            const T av = arow[k];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<std::size_t>(k) * cols;
            for (int n = 0; n < cols; ++n) crow[n] += av * brow[n];
        }
    }
}

// Dot product with four independent accumulators so the FP dependency chain
// does not serialize; summation order is fixed, so results stay reproducible.
template <typename T>
T dot(const T* a, const T* b, int n) {
    T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) acc0 += a[i] * b[i];
    return ((acc0 + acc1) + (acc2 + acc3));
}

template <typename T>
void check_conv_input(const Tensor<T>& input, const ConvLayer<T>& layer) {
    if (input.rank() != 4) {
        throw ShapeError("conv input must be rank 4, got " + shape_string(input.shape));
    }
    if (input.dim(1) != layer.in_channels) {
        throw ShapeError("conv input channels " + std::to_string(input.dim(1)) +
                         " do not match layer in_channels " +
                         std::to_string(layer.in_channels));
    }
}

} // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer,
                         ConvWorkspace<T>* ws) {
    check_conv_input(input, layer);
    const int batch = input.dim(0);
    const int in_h = input.dim(2);
    const int in_w = input.dim(3);
    const ConvDims dims = conv_output_dims(in_h, in_w, layer.kernel, layer.stride,
                                           layer.padding);
    const int spatial = dims.out_h * dims.out_w;
    const int inner = layer.in_channels * layer.kernel * layer.kernel;

    ConvWorkspace<T> local;
    ConvWorkspace<T>& scratch = ws ? *ws : local;
    scratch.col.resize(static_cast<std::size_t>(inner) * spatial);

    Tensor<T> output({batch, layer.out_channels, dims.out_h, dims.out_w});
    const std::size_t image_in = static_cast<std::size_t>(layer.in_channels) * in_h * in_w;
    const std::size_t image_out = static_cast<std::size_t>(layer.out_channels) * spatial;

    for (int n = 0; n < batch; ++n) {
        im2col(input.data() + n * image_in, layer.in_channels, in_h, in_w,
               layer.kernel, layer.stride, layer.padding, dims.out_h, dims.out_w,
               scratch.col.data());
        T* out = output.data() + n * image_out;
        for (int m = 0; m < layer.out_channels; ++m) {
            T* row = out + static_cast<std::size_t>(m) * spatial;
            const T b = layer.bias.values[static_cast<std::size_t>(m)];
            for (int sp = 0; sp < spatial; ++sp) row[sp] = b;
        }
        gemm_accumulate(layer.out_channels, spatial, inner, layer.weight.data(),
                        scratch.col.data(), out);
    }
    return output;
}

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& input, ConvLayer<T>& layer,
                          const Tensor<T>& upstream, ConvWorkspace<T>* ws) {
    check_conv_input(input, layer);
    const int batch = input.dim(0);
    const int in_h = input.dim(2);
    const int in_w = input.dim(3);
    const ConvDims dims = conv_output_dims(in_h, in_w, layer.kernel, layer.stride,
                                           layer.padding);
    require_shape(upstream, {batch, layer.out_channels, dims.out_h, dims.out_w},
                  "conv upstream gradient");

    const int spatial = dims.out_h * dims.out_w;
    const int inner = layer.in_channels * layer.kernel * layer.kernel;

    ConvWorkspace<T> local;
    ConvWorkspace<T>& scratch = ws ? *ws : local;
    scratch.col.resize(static_cast<std::size_t>(inner) * spatial);
    scratch.dcol.resize(static_cast<std::size_t>(inner) * spatial);

    Tensor<T> input_grad({batch, layer.in_channels, in_h, in_w});
    const std::size_t image_in = static_cast<std::size_t>(layer.in_channels) * in_h * in_w;
    const std::size_t image_out = static_cast<std::size_t>(layer.out_channels) * spatial;

    for (int n = 0; n < batch; ++n) {
        im2col(input.data() + n * image_in, layer.in_channels, in_h, in_w,
               layer.kernel, layer.stride, layer.padding, dims.out_h, dims.out_w,
               scratch.col.data());
        const T* dy = upstream.data() + n * image_out;

        for (int m = 0; m < layer.out_channels; ++m) {
            const T* dyrow = dy + static_cast<std::size_t>(m) * spatial;
            T sum = 0;
            for (int sp = 0; sp < spatial; ++sp) sum += dyrow[sp];
            layer.bias_grad.values[static_cast<std::size_t>(m)] += sum;

            T* wg = layer.weight_grad.data() + static_cast<std::size_t>(m) * inner;
            for (int k = 0; k < inner; ++k) {
                wg[k] += dot(dyrow, scratch.col.data() + static_cast<std::size_t>(k) * spatial,
                             spatial);
            }
        }

        std::fill(scratch.dcol.begin(), scratch.dcol.end(), T(0));
        for (int m = 0; m < layer.out_channels; ++m) {
            const T* dyrow = dy + static_cast<std::size_t>(m) * spatial;
            const T* wrow = layer.weight.data() + static_cast<std::size_t>(m) * inner;
            for (int k = 0; k < inner; ++k) {
                const T wv = wrow[k];
                if (wv == T(0)) continue;
                T* drow = scratch.dcol.data() + static_cast<std::size_t>(k) * spatial;
                for (int sp = 0; sp < spatial; ++sp) drow[sp] += wv * dyrow[sp];
            }
        }
        col2im(scratch.dcol.data(), layer.in_channels, in_h, in_w, layer.kernel,
               layer.stride, layer.padding, dims.out_h, dims.out_w,
               input_grad.data() + n * image_in);
    }
    return input_grad;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i) {
        out.values[i] = input.values[i] > T(0) ? input.values[i] : T(0);
    }
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& forward_input, const Tensor<T>& upstream) {
    if (!forward_input.same_shape(upstream)) {
        throw ShapeError("relu gradient shape mismatch");
    }
    Tensor<T> out(upstream.shape);
    for (std::size_t i = 0; i < upstream.numel(); ++i) {
        out.values[i] = forward_input.values[i] > T(0) ? upstream.values[i] : T(0);
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input) {
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i) {
        const T x = input.values[i];
        if (x >= T(0)) {
            const T e = std::exp(-x);
            out.values[i] = T(1) / (T(1) + e);
        } else {
            const T e = std::exp(x);
            out.values[i] = e / (T(1) + e);
        }
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& forward_output, const Tensor<T>& upstream) {
    if (!forward_output.same_shape(upstream)) {
        throw ShapeError("sigmoid gradient shape mismatch");
    }
    Tensor<T> out(upstream.shape);
    for (std::size_t i = 0; i < upstream.numel(); ++i) {
        const T y = forward_output.values[i];
        out.values[i] = upstream.values[i] * y * (T(1) - y);
    }
    return out;
}

template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& input, int block) {
    if (input.rank() != 4) throw ShapeError("space_to_depth expects rank 4");
    const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (block <= 0 || h % block != 0 || w % block != 0) {
        throw ShapeError("space_to_depth: spatial dims " + std::to_string(h) + "x" +
                         std::to_string(w) + " not divisible by block " +
                         std::to_string(block));
    }
    Tensor<T> out({n, c * block * block, h / block, w / block});
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            for (int oy = 0; oy < h / block; ++oy) {
                for (int ox = 0; ox < w / block; ++ox) {
                    for (int by = 0; by < block; ++by) {
                        for (int bx = 0; bx < block; ++bx) {
                            const int oc = ic * block * block + by * block + bx;
                            out.at4(in, oc, oy, ox) =
                                input.at4(in, ic, oy * block + by, ox * block + bx);
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> space_to_depth_backward(const Tensor<T>& upstream, int block) {
    if (upstream.rank() != 4) throw ShapeError("space_to_depth expects rank 4");
    const int n = upstream.dim(0), oc = upstream.dim(1), oh = upstream.dim(2),
              ow = upstream.dim(3);
    if (block <= 0 || oc % (block * block) != 0) {
        throw ShapeError("space_to_depth backward: channels not divisible by block^2");
    }
    const int c = oc / (block * block);
    Tensor<T> out({n, c, oh * block, ow * block});
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    for (int by = 0; by < block; ++by) {
                        for (int bx = 0; bx < block; ++bx) {
                            out.at4(in, ic, oy * block + by, ox * block + bx) =
                                upstream.at4(in, ic * block * block + by * block + bx,
                                             oy, ox);
                        }
                    }
                }
            }
        }
    }
    return out;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;

template Tensor<float> conv2d_forward(const Tensor<float>&, const ConvLayer<float>&, ConvWorkspace<float>*);
template Tensor<double> conv2d_forward(const Tensor<double>&, const ConvLayer<double>&, ConvWorkspace<double>*);
template Tensor<float> conv2d_backward(const Tensor<float>&, ConvLayer<float>&, const Tensor<float>&, ConvWorkspace<float>*);
template Tensor<double> conv2d_backward(const Tensor<double>&, ConvLayer<double>&, const Tensor<double>&, ConvWorkspace<double>*);
template Tensor<float> relu_forward(const Tensor<float>&);
template Tensor<double> relu_forward(const Tensor<double>&);
template Tensor<float> relu_backward(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> relu_backward(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> sigmoid_forward(const Tensor<float>&);
template Tensor<double> sigmoid_forward(const Tensor<double>&);
template Tensor<float> sigmoid_backward(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> sigmoid_backward(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> space_to_depth(const Tensor<float>&, int);
template Tensor<double> space_to_depth(const Tensor<double>&, int);
template Tensor<float> space_to_depth_backward(const Tensor<float>&, int);
template Tensor<double> space_to_depth_backward(const Tensor<double>&, int);

} // namespace oandet
