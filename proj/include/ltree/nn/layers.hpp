#pragma once

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ltree/core/rng.hpp"
#include "ltree/nn/tensor.hpp"

namespace ltree::nn {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// Gathers conv patches for output depth rows [od0, od1) into a
// [Ci*k^3, (od1-od0)*Ho*Wo] row-major matrix; out-of-range taps are zero.
template <typename T>
void im2col(const T* x, int Ci, int D, int H, int W, int k, int s, int p, int Ho, int Wo,
            int od0, int od1, T* col) {
    const int64_t cols = int64_t(od1 - od0) * Ho * Wo;
    int64_t row = 0;
    for (int ci = 0; ci < Ci; ++ci)
        for (int kd = 0; kd < k; ++kd)
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw, ++row) {
                    T* dst = col + row * cols;
                    int64_t o = 0;
                    for (int od = od0; od < od1; ++od) {
                        const int id = od * s - p + kd;
                        if (id < 0 || id >= D) {
                            std::fill(dst + o, dst + o + int64_t(Ho) * Wo, T(0));
                            o += int64_t(Ho) * Wo;
                            continue;
                        }
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * s - p + kh;
                            if (ih < 0 || ih >= H) {
                                std::fill(dst + o, dst + o + Wo, T(0));
                                o += Wo;
                                continue;
                            }
                            const T* src = x + (int64_t(ci) * D + id) * H * W + int64_t(ih) * W;
                            if (s == 1) {
                                const int iw0 = -p + kw;
                                const int lo = std::max(0, -iw0);
                                const int hi = std::min(Wo, W - iw0);
                                for (int ow = 0; ow < lo; ++ow) dst[o + ow] = T(0);
                                for (int ow = lo; ow < hi; ++ow) dst[o + ow] = src[iw0 + ow];
                                for (int ow = hi; ow < Wo; ++ow) dst[o + ow] = T(0);
                                o += Wo;
                            } else {
                                for (int ow = 0; ow < Wo; ++ow, ++o) {
                                    const int iw = ow * s - p + kw;
                                    dst[o] = (iw >= 0 && iw < W) ? src[iw] : T(0);
                                }
                            }
                        }
                    }
                }
}

// Scatter-add transpose of im2col.
template <typename T>
void col2im_add(const T* col, int Ci, int D, int H, int W, int k, int s, int p, int Ho, int Wo,
                int od0, int od1, T* gx) {
    const int64_t cols = int64_t(od1 - od0) * Ho * Wo;
    int64_t row = 0;
    for (int ci = 0; ci < Ci; ++ci)
        for (int kd = 0; kd < k; ++kd)
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw, ++row) {
                    const T* src = col + row * cols;
                    int64_t o = 0;
                    for (int od = od0; od < od1; ++od) {
                        const int id = od * s - p + kd;
                        if (id < 0 || id >= D) {
                            o += int64_t(Ho) * Wo;
                            continue;
                        }
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * s - p + kh;
                            if (ih < 0 || ih >= H) {
                                o += Wo;
                                continue;
                            }
                            T* dst = gx + (int64_t(ci) * D + id) * H * W + int64_t(ih) * W;
                            for (int ow = 0; ow < Wo; ++ow, ++o) {
                                const int iw = ow * s - p + kw;
                                if (iw >= 0 && iw < W) dst[iw] += src[o];
                            }
                        }
                    }
                }
}

}  // namespace detail

// 3D convolution, cubic kernel, PyTorch floor semantics for output dims.
// forward() caches the input for backward(); infer() is const and
// thread-safe for concurrent patch-parallel sampling.
template <typename T>
class Conv3d {
public:
    Conv3d() = default;
    Conv3d(std::string name, int in_ch, int out_ch, int kernel, int stride = 1, int pad = -1)
        : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), s_(stride),
          p_(pad >= 0 ? pad : (kernel - 1) / 2) {
        weight_.name = name + ".weight";
        weight_.value = Tensor<T>({out_ch, in_ch, k_, k_, k_});
        weight_.grad = Tensor<T>::zeros_like(weight_.value);
        bias_.name = name + ".bias";
        bias_.value = Tensor<T>({out_ch});
        bias_.grad = Tensor<T>::zeros_like(bias_.value);
    }

    void init_he(Rng& rng) {
        const double std = std::sqrt(2.0 / (double(in_ch_) * k_ * k_ * k_));
        for (auto& w : weight_.value.data) w = T(rng.normal() * std);
        bias_.value.fill(T(0));
    }
    void init_zero() {
        weight_.value.fill(T(0));
        bias_.value.fill(T(0));
    }

    std::vector<int> out_shape(const std::vector<int>& in) const {
        auto o = [&](int d) { return (d + 2 * p_ - k_) / s_ + 1; };
        return {in[0], out_ch_, o(in[2]), o(in[3]), o(in[4])};
    }

    Tensor<T> forward(const Tensor<T>& x) {
        cached_in_ = x;
        return run(x);
    }

    Tensor<T> infer(const Tensor<T>& x) const { return run(x); }

    Tensor<T> backward(const Tensor<T>& gout) {
        const Tensor<T>& x = cached_in_;
        const int N = x.dim(0), D = x.dim(2), H = x.dim(3), W = x.dim(4);
        const int Do = gout.dim(2), Ho = gout.dim(3), Wo = gout.dim(4);
        const int CiK = in_ch_ * k_ * k_ * k_;
        Tensor<T> gx = Tensor<T>::zeros_like(x);

        Eigen::Map<const RowMat<T>> Wm(weight_.value.ptr(), out_ch_, CiK);
        Eigen::Map<RowMat<T>> Gw(weight_.grad.ptr(), out_ch_, CiK);

        const int chunk = chunk_rows(CiK, Ho, Wo);
        std::vector<T> col;
        std::vector<T> gcol;
        for (int n = 0; n < N; ++n) {
            const T* xn = x.ptr() + int64_t(n) * in_ch_ * D * H * W;
            T* gxn = gx.ptr() + int64_t(n) * in_ch_ * D * H * W;
            const T* gn = gout.ptr() + int64_t(n) * out_ch_ * Do * Ho * Wo;
            for (int od0 = 0; od0 < Do; od0 += chunk) {
                const int od1 = std::min(Do, od0 + chunk);
                const int64_t L = int64_t(od1 - od0) * Ho * Wo;
                col.resize(size_t(CiK) * L);
                gcol.resize(size_t(CiK) * L);
                detail::im2col(xn, in_ch_, D, H, W, k_, s_, p_, Ho, Wo, od0, od1, col.data());

                // gout rows for this chunk: [Co, L] but strided by full plane;
                // gather into a contiguous view.
                RowMat<T> G(out_ch_, L);
                for (int co = 0; co < out_ch_; ++co)
                    std::copy(gn + (int64_t(co) * Do + od0) * Ho * Wo,
                              gn + (int64_t(co) * Do + od1) * Ho * Wo, G.data() + int64_t(co) * L);

                Eigen::Map<const RowMat<T>> Col(col.data(), CiK, L);
                Gw.noalias() += G * Col.transpose();
                for (int co = 0; co < out_ch_; ++co)
                    bias_.grad.data[size_t(co)] += G.row(co).sum();

                Eigen::Map<RowMat<T>> GCol(gcol.data(), CiK, L);
                GCol.noalias() = Wm.transpose() * G;
                detail::col2im_add(gcol.data(), in_ch_, D, H, W, k_, s_, p_, Ho, Wo, od0, od1, gxn);
            }
        }
        return gx;
    }

    void collect(ParamRefs<T>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    int64_t param_count() const { return weight_.value.numel() + bias_.value.numel(); }
    void release_cache() { cached_in_ = Tensor<T>(); }

private:
    Tensor<T> run(const Tensor<T>& x) const {
        if (x.dim(1) != in_ch_) throw std::invalid_argument("Conv3d: channel mismatch");
        const int N = x.dim(0), D = x.dim(2), H = x.dim(3), W = x.dim(4);
        auto os = out_shape(x.shape);
        const int Do = os[2], Ho = os[3], Wo = os[4];
        const int CiK = in_ch_ * k_ * k_ * k_;
        Tensor<T> out(os);

        Eigen::Map<const RowMat<T>> Wm(weight_.value.ptr(), out_ch_, CiK);
        const int chunk = chunk_rows(CiK, Ho, Wo);
        // Reused per worker thread: patch-parallel sampling calls many small
        // convs and the im2col buffer is the dominant recurring allocation.
        static thread_local std::vector<T> col;
        for (int n = 0; n < N; ++n) {
            const T* xn = x.ptr() + int64_t(n) * in_ch_ * D * H * W;
            T* on = out.ptr() + int64_t(n) * out_ch_ * Do * Ho * Wo;
            for (int od0 = 0; od0 < Do; od0 += chunk) {
                const int od1 = std::min(Do, od0 + chunk);
                const int64_t L = int64_t(od1 - od0) * Ho * Wo;
                if (col.size() < size_t(CiK) * L) col.resize(size_t(CiK) * L);
                detail::im2col(xn, in_ch_, D, H, W, k_, s_, p_, Ho, Wo, od0, od1, col.data());
                Eigen::Map<const RowMat<T>> Col(col.data(), CiK, L);
                RowMat<T> O(out_ch_, L);
                O.noalias() = Wm * Col;
                for (int co = 0; co < out_ch_; ++co) {
                    const T b = bias_.value.data[size_t(co)];
                    T* dst = on + (int64_t(co) * Do + od0) * Ho * Wo;
                    const T* src = O.data() + int64_t(co) * L;
                    for (int64_t i = 0; i < L; ++i) dst[i] = src[i] + b;
                }
            }
        }
        return out;
    }

    static int chunk_rows(int CiK, int Ho, int Wo) {
        // Bound the im2col workspace to ~16M scalar elements.
        const int64_t cap = int64_t(1) << 24;
        int64_t per_row = int64_t(CiK) * Ho * Wo;
        return std::max<int>(1, int(cap / std::max<int64_t>(per_row, 1)));
    }

    int in_ch_ = 0, out_ch_ = 0, k_ = 3, s_ = 1, p_ = 1;
    Param<T> weight_, bias_;
    Tensor<T> cached_in_;
};

template <typename T>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(std::string name, int channels, int groups)
        : channels_(channels), groups_(std::min(groups, channels)) {
        while (channels_ % groups_ != 0) --groups_;
        gamma_.name = name + ".weight";
        gamma_.value = Tensor<T>({channels}, T(1));
        gamma_.grad = Tensor<T>({channels});
        beta_.name = name + ".bias";
        beta_.value = Tensor<T>({channels});
        beta_.grad = Tensor<T>({channels});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> out = Tensor<T>::zeros_like(x);
        xhat_ = Tensor<T>::zeros_like(x);
        const int N = x.dim(0);
        rstd_.assign(size_t(N) * groups_, T(0));
        run(x, out, &xhat_, rstd_.data());
        return out;
    }

    Tensor<T> infer(const Tensor<T>& x) const {
        Tensor<T> out = Tensor<T>::zeros_like(x);
        run(x, out, nullptr, nullptr);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gout) {
        const int N = gout.dim(0), C = gout.dim(1);
        const int64_t spatial = int64_t(gout.dim(2)) * gout.dim(3) * gout.dim(4);
        const int cpg = C / groups_;
        const int64_t m = cpg * spatial;
        Tensor<T> gx = Tensor<T>::zeros_like(gout);

        for (int n = 0; n < N; ++n) {
            for (int g = 0; g < groups_; ++g) {
                const T rstd = rstd_[size_t(n) * groups_ + g];
                // t1 = mean(dy*gamma), t2 = mean(dy*gamma*xhat) over the group
                double t1 = 0, t2 = 0;
                for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
                    const T gam = gamma_.value.data[size_t(c)];
                    const int64_t base = (int64_t(n) * C + c) * spatial;
                    for (int64_t i = 0; i < spatial; ++i) {
                        const T dyg = gout.data[size_t(base + i)] * gam;
                        t1 += double(dyg);
                        t2 += double(dyg) * double(xhat_.data[size_t(base + i)]);
                    }
                }
                const T mt1 = T(t1 / double(m)), mt2 = T(t2 / double(m));
                for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
                    const T gam = gamma_.value.data[size_t(c)];
                    const int64_t base = (int64_t(n) * C + c) * spatial;
                    for (int64_t i = 0; i < spatial; ++i) {
                        const T dyg = gout.data[size_t(base + i)] * gam;
                        gx.data[size_t(base + i)] =
                            rstd * (dyg - mt1 - xhat_.data[size_t(base + i)] * mt2);
                    }
                }
            }
            // Parameter grads.
            for (int c = 0; c < C; ++c) {
                const int64_t base = (int64_t(n) * C + c) * spatial;
                double dg = 0, db = 0;
                for (int64_t i = 0; i < spatial; ++i) {
                    dg += double(gout.data[size_t(base + i)]) * double(xhat_.data[size_t(base + i)]);
                    db += double(gout.data[size_t(base + i)]);
                }
                gamma_.grad.data[size_t(c)] += T(dg);
                beta_.grad.data[size_t(c)] += T(db);
            }
        }
        return gx;
    }

    void collect(ParamRefs<T>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

    int64_t param_count() const { return 2 * channels_; }
    void release_cache() {
        xhat_ = Tensor<T>();
        rstd_.clear();
    }

private:
    void run(const Tensor<T>& x, Tensor<T>& out, Tensor<T>* xhat, T* rstd_out) const {
        const int N = x.dim(0), C = x.dim(1);
        if (C != channels_) throw std::invalid_argument("GroupNorm: channel mismatch");
        const int64_t spatial = int64_t(x.dim(2)) * x.dim(3) * x.dim(4);
        const int cpg = C / groups_;
        const int64_t m = cpg * spatial;
        constexpr double eps = 1e-5;

        for (int n = 0; n < N; ++n)
            for (int g = 0; g < groups_; ++g) {
                double sum = 0, sq = 0;
                for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
                    const int64_t base = (int64_t(n) * C + c) * spatial;
                    for (int64_t i = 0; i < spatial; ++i) {
                        const double v = double(x.data[size_t(base + i)]);
                        sum += v;
                        sq += v * v;
                    }
                }
                const double mean = sum / double(m);
                const double var = std::max(0.0, sq / double(m) - mean * mean);
                const T rstd = T(1.0 / std::sqrt(var + eps));
                if (rstd_out) rstd_out[size_t(n) * groups_ + g] = rstd;
                for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
                    const T gam = gamma_.value.data[size_t(c)];
                    const T bet = beta_.value.data[size_t(c)];
                    const int64_t base = (int64_t(n) * C + c) * spatial;
                    for (int64_t i = 0; i < spatial; ++i) {
                        const T xh = T((double(x.data[size_t(base + i)]) - mean)) * rstd;
                        if (xhat) xhat->data[size_t(base + i)] = xh;
                        out.data[size_t(base + i)] = gam * xh + bet;
                    }
                }
            }
    }

    int channels_ = 0, groups_ = 1;
    Param<T> gamma_, beta_;
    Tensor<T> xhat_;
    std::vector<T> rstd_;
};

template <typename T>
class SiLU {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        cached_in_ = x;
        return infer(x);
    }

    Tensor<T> infer(const Tensor<T>& x) const {
        Tensor<T> out = Tensor<T>::zeros_like(x);
        for (size_t i = 0; i < x.data.size(); ++i) {
            const T v = x.data[i];
            out.data[i] = v * sigmoid(v);
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gout) {
        Tensor<T> gx = Tensor<T>::zeros_like(gout);
        for (size_t i = 0; i < gout.data.size(); ++i) {
            const T v = cached_in_.data[i];
            const T s = sigmoid(v);
            gx.data[i] = gout.data[i] * (s * (T(1) + v * (T(1) - s)));
        }
        return gx;
    }

    void release_cache() { cached_in_ = Tensor<T>(); }

private:
    static T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }
    Tensor<T> cached_in_;
};

template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_f, int out_f) : in_f_(in_f), out_f_(out_f) {
        weight_.name = name + ".weight";
        weight_.value = Tensor<T>({out_f, in_f});
        weight_.grad = Tensor<T>::zeros_like(weight_.value);
        bias_.name = name + ".bias";
        bias_.value = Tensor<T>({out_f});
        bias_.grad = Tensor<T>::zeros_like(bias_.value);
    }

    void init_he(Rng& rng) {
        const double std = std::sqrt(2.0 / double(in_f_));
        for (auto& w : weight_.value.data) w = T(rng.normal() * std);
        bias_.value.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        cached_in_ = x;
        return infer(x);
    }

    Tensor<T> infer(const Tensor<T>& x) const {
        // Row-at-a-time so results are bitwise independent of the batch size.
        const int N = x.dim(0);
        Tensor<T> out({N, out_f_});
        Eigen::Map<const RowMat<T>> W(weight_.value.ptr(), out_f_, in_f_);
        for (int n = 0; n < N; ++n) {
            Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xn(x.ptr() + int64_t(n) * in_f_,
                                                                     in_f_);
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> on(out.ptr() + int64_t(n) * out_f_,
                                                               out_f_);
            on.noalias() = W * xn;
            for (int f = 0; f < out_f_; ++f)
                out.data[size_t(n) * out_f_ + size_t(f)] += bias_.value.data[size_t(f)];
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gout) {
        const int N = gout.dim(0);
        Eigen::Map<const RowMat<T>> G(gout.ptr(), N, out_f_);
        Eigen::Map<const RowMat<T>> X(cached_in_.ptr(), N, in_f_);
        Eigen::Map<RowMat<T>> Gw(weight_.grad.ptr(), out_f_, in_f_);
        Gw.noalias() += G.transpose() * X;
        for (int f = 0; f < out_f_; ++f) bias_.grad.data[size_t(f)] += G.col(f).sum();
        Tensor<T> gx({N, in_f_});
        Eigen::Map<const RowMat<T>> W(weight_.value.ptr(), out_f_, in_f_);
        Eigen::Map<RowMat<T>> Gx(gx.ptr(), N, in_f_);
        Gx.noalias() = G * W;
        return gx;
    }

    void collect(ParamRefs<T>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    int64_t param_count() const { return weight_.value.numel() + bias_.value.numel(); }
    void release_cache() { cached_in_ = Tensor<T>(); }

private:
    int in_f_ = 0, out_f_ = 0;
    Param<T> weight_, bias_;
    Tensor<T> cached_in_;
};

// Nearest-neighbor upsampling by an integer factor.
template <typename T>
class UpsampleNearest {
public:
    explicit UpsampleNearest(int factor = 2) : f_(factor) {}

    Tensor<T> forward(const Tensor<T>& x) { return infer(x); }

    Tensor<T> infer(const Tensor<T>& x) const {
        const int N = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
        Tensor<T> out({N, C, D * f_, H * f_, W * f_});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int d = 0; d < D * f_; ++d)
                    for (int h = 0; h < H * f_; ++h) {
                        const T* src = x.ptr() +
                                       (((int64_t(n) * C + c) * D + d / f_) * H + h / f_) * W;
                        T* dst = out.ptr() +
                                 (((int64_t(n) * C + c) * D * f_ + d) * H * f_ + h) * (int64_t(W) * f_);
                        for (int w = 0; w < W * f_; ++w) dst[w] = src[w / f_];
                    }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& gout) {
        const int N = gout.dim(0), C = gout.dim(1);
        const int D = gout.dim(2) / f_, H = gout.dim(3) / f_, W = gout.dim(4) / f_;
        Tensor<T> gx({N, C, D, H, W});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int d = 0; d < D * f_; ++d)
                    for (int h = 0; h < H * f_; ++h) {
                        const T* src = gout.ptr() +
                                       (((int64_t(n) * C + c) * D * f_ + d) * H * f_ + h) *
                                           (int64_t(W) * f_);
                        T* dst = gx.ptr() + (((int64_t(n) * C + c) * D + d / f_) * H + h / f_) * W;
                        for (int w = 0; w < W * f_; ++w) dst[w / f_] += src[w];
                    }
        return gx;
    }

private:
    int f_ = 2;
};

}  // namespace ltree::nn
