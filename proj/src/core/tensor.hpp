#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace oandet {

// Dense row-major tensor. Layout convention for 4-d tensors is NCHW.
// T is float for production paths and double for finite-difference checks.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;

    Tensor() = default;

    explicit Tensor(std::vector<int> shape_in) : shape(std::move(shape_in)) {
        values.assign(numel_of(shape), T(0));
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return values.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T* data() { return values.data(); }
    const T* data() const { return values.data(); }

    void fill(T v) { std::fill(values.begin(), values.end(), v); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    // NCHW accessors; only valid for rank-4 tensors.
    T& at4(int n, int c, int h, int w) {
        return values[offset4(n, c, h, w)];
    }
    const T& at4(int n, int c, int h, int w) const {
        return values[offset4(n, c, h, w)];
    }

    std::size_t offset4(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) *
                   shape[3] +
               w;
    }
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (T v : t.values) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

inline std::string shape_string(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<int>& expected,
                   const char* what) {
    if (t.shape != expected) {
        throw ShapeError(std::string(what) + ": expected " +
                         shape_string(expected) + ", got " +
                         shape_string(t.shape));
    }
}

} // namespace oandet
