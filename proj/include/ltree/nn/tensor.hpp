#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltree::nn {

// Dense row-major tensor (last dimension fastest). Activations are
// [N, C, D, H, W]; D maps to z, H to y, W to x of the co-registered grids.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_, T fill = T(0)) : shape(std::move(shape_)) {
        data.assign(size_t(numel()), fill);
    }

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    int dim(int i) const { return shape[size_t(i)]; }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

    Tensor& operator+=(const Tensor& o) {
        check_same(o, "+=");
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        check_same(o, "-=");
        for (size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
        return *this;
    }
    Tensor& operator*=(T s) {
        for (auto& v : data) v *= s;
        return *this;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    void check_same(const Tensor& o, const char* op) const {
        if (!same_shape(o)) throw std::invalid_argument(std::string("tensor shape mismatch in ") + op);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape.size() != 5 || b.shape.size() != 5)
        throw std::invalid_argument("concat_channels: expects 5D tensors");
    for (int i : {0, 2, 3, 4})
        if (a.shape[size_t(i)] != b.shape[size_t(i)])
            throw std::invalid_argument("concat_channels: non-channel dims differ");
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const int64_t spatial = int64_t(a.dim(2)) * a.dim(3) * a.dim(4);
    Tensor<T> out({n, ca + cb, a.dim(2), a.dim(3), a.dim(4)});
    for (int i = 0; i < n; ++i) {
        std::copy(a.ptr() + i * ca * spatial, a.ptr() + (i + 1) * ca * spatial,
                  out.ptr() + i * int64_t(ca + cb) * spatial);
        std::copy(b.ptr() + i * cb * spatial, b.ptr() + (i + 1) * cb * spatial,
                  out.ptr() + i * int64_t(ca + cb) * spatial + ca * spatial);
    }
    return out;
}

// Inverse of concat_channels for gradients: splits along the channel axis.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int ca) {
    const int n = x.dim(0), c = x.dim(1);
    const int cb = c - ca;
    const int64_t spatial = int64_t(x.dim(2)) * x.dim(3) * x.dim(4);
    Tensor<T> a({n, ca, x.dim(2), x.dim(3), x.dim(4)});
    Tensor<T> b({n, cb, x.dim(2), x.dim(3), x.dim(4)});
    for (int i = 0; i < n; ++i) {
        std::copy(x.ptr() + i * int64_t(c) * spatial, x.ptr() + i * int64_t(c) * spatial + ca * spatial,
                  a.ptr() + i * int64_t(ca) * spatial);
        std::copy(x.ptr() + i * int64_t(c) * spatial + ca * spatial,
                  x.ptr() + (i + 1) * int64_t(c) * spatial, b.ptr() + i * int64_t(cb) * spatial);
    }
    return {std::move(a), std::move(b)};
}

}  // namespace ltree::nn
