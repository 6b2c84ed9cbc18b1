#pragma once

#include "ltree/nn/layers.hpp"

namespace ltree::nn {

// sin/cos features of integer timesteps, [N, dim].
template <typename T>
Tensor<T> sinusoidal_embedding(const std::vector<int>& t, int dim) {
    const int half = dim / 2;
    Tensor<T> out({int(t.size()), dim});
    for (size_t n = 0; n < t.size(); ++n)
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
            const double a = double(t[n]) * freq;
            out.data[n * size_t(dim) + size_t(i)] = T(std::sin(a));
            out.data[n * size_t(dim) + size_t(half + i)] = T(std::cos(a));
        }
    return out;
}

// Two-layer MLP over the sinusoidal features, shared by all residual blocks.
template <typename T>
class TimeEmbedding {
public:
    TimeEmbedding() = default;
    TimeEmbedding(std::string name, int sin_dim, int out_dim)
        : sin_dim_(sin_dim), lin1_(name + ".lin1", sin_dim, out_dim),
          lin2_(name + ".lin2", out_dim, out_dim) {}

    void init(Rng& rng) {
        lin1_.init_he(rng);
        lin2_.init_he(rng);
    }

    Tensor<T> forward(const std::vector<int>& t) {
        auto h = lin1_.forward(sinusoidal_embedding<T>(t, sin_dim_));
        return lin2_.forward(act_.forward(h));
    }

    Tensor<T> infer(const std::vector<int>& t) const {
        auto h = lin1_.infer(sinusoidal_embedding<T>(t, sin_dim_));
        return lin2_.infer(act_.infer(h));
    }

    void backward(const Tensor<T>& gout) {
        auto g = lin2_.backward(gout);
        g = act_.backward(g);
        lin1_.backward(g);
    }

    void collect(ParamRefs<T>& out) {
        lin1_.collect(out);
        lin2_.collect(out);
    }

    int64_t param_count() const { return lin1_.param_count() + lin2_.param_count(); }

private:
    int sin_dim_ = 0;
    Linear<T> lin1_, lin2_;
    SiLU<T> act_;
};

// GN -> SiLU -> Conv (+ per-channel time bias) -> GN -> SiLU -> Conv, with an
// identity or 1x1-conv skip. The time path is optional (codecs have none).
// groups == 0 drops the normalization: group statistics couple every spatial
// position, which would break the shift-locality the tiled codec inference
// relies on, so the codec blocks run norm-free.
template <typename T>
class ResBlock3d {
public:
    ResBlock3d() = default;
    ResBlock3d(std::string name, int in_ch, int out_ch, int groups, int temb_dim = 0)
        : in_ch_(in_ch), out_ch_(out_ch), has_temb_(temb_dim > 0), has_norm_(groups > 0) {
        if (has_norm_) {
            gn1_ = GroupNorm<T>(name + ".gn1", in_ch, groups);
            gn2_ = GroupNorm<T>(name + ".gn2", out_ch, groups);
        }
        conv1_ = Conv3d<T>(name + ".conv1", in_ch, out_ch, 3);
        conv2_ = Conv3d<T>(name + ".conv2", out_ch, out_ch, 3);
        if (has_temb_) temb_proj_ = Linear<T>(name + ".temb_proj", temb_dim, out_ch);
        if (in_ch != out_ch) skip_ = Conv3d<T>(name + ".skip", in_ch, out_ch, 1, 1, 0);
    }

    void init(Rng& rng) {
        conv1_.init_he(rng);
        conv2_.init_he(rng);
        if (has_temb_) temb_proj_.init_he(rng);
        if (in_ch_ != out_ch_) skip_.init_he(rng);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>* temb = nullptr) {
        auto h = conv1_.forward(act1_.forward(has_norm_ ? gn1_.forward(x) : x));
        if (has_temb_) add_channel_bias(h, temb_proj_.forward(*temb));
        h = conv2_.forward(act2_.forward(has_norm_ ? gn2_.forward(h) : h));
        if (in_ch_ != out_ch_) {
            auto s = skip_.forward(x);
            h += s;
        } else {
            h += x;
        }
        return h;
    }

    Tensor<T> infer(const Tensor<T>& x, const Tensor<T>* temb = nullptr) const {
        auto h = conv1_.infer(act1_.infer(has_norm_ ? gn1_.infer(x) : x));
        if (has_temb_) add_channel_bias(h, temb_proj_.infer(*temb));
        h = conv2_.infer(act2_.infer(has_norm_ ? gn2_.infer(h) : h));
        if (in_ch_ != out_ch_) {
            auto s = skip_.infer(x);
            h += s;
        } else {
            h += x;
        }
        return h;
    }

    // Returns grad wrt x; if the block has a time path, accumulates the
    // time-trunk gradient into *gtemb.
    Tensor<T> backward(const Tensor<T>& gout, Tensor<T>* gtemb = nullptr) {
        auto g = conv2_.backward(gout);
        g = act2_.backward(g);
        if (has_norm_) g = gn2_.backward(g);
        if (has_temb_) {
            // d(bias)[n, c] = sum over spatial of g
            const int N = g.dim(0), C = g.dim(1);
            const int64_t spatial = int64_t(g.dim(2)) * g.dim(3) * g.dim(4);
            Tensor<T> gb({N, C});
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    double s = 0;
                    const T* p = g.ptr() + (int64_t(n) * C + c) * spatial;
                    for (int64_t i = 0; i < spatial; ++i) s += double(p[i]);
                    gb.data[size_t(n) * C + size_t(c)] = T(s);
                }
            auto gt = temb_proj_.backward(gb);
            if (gtemb) *gtemb += gt;
        }
        auto gx = act1_.backward(conv1_.backward(g));
        if (has_norm_) gx = gn1_.backward(gx);
        if (in_ch_ != out_ch_) {
            auto gs = skip_.backward(gout);
            gx += gs;
        } else {
            gx += gout;
        }
        return gx;
    }

    void collect(ParamRefs<T>& out) {
        if (has_norm_) gn1_.collect(out);
        conv1_.collect(out);
        if (has_norm_) gn2_.collect(out);
        conv2_.collect(out);
        if (has_temb_) temb_proj_.collect(out);
        if (in_ch_ != out_ch_) skip_.collect(out);
    }

    int64_t param_count() const {
        int64_t n = conv1_.param_count() + conv2_.param_count();
        if (has_norm_) n += gn1_.param_count() + gn2_.param_count();
        if (has_temb_) n += temb_proj_.param_count();
        if (in_ch_ != out_ch_) n += skip_.param_count();
        return n;
    }

    // Halo growth in input voxels at the block's own resolution.
    static constexpr int receptive_radius() { return 2; }

private:
    static void add_channel_bias(Tensor<T>& h, const Tensor<T>& bias) {
        const int N = h.dim(0), C = h.dim(1);
        const int64_t spatial = int64_t(h.dim(2)) * h.dim(3) * h.dim(4);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T b = bias.data[size_t(n) * C + size_t(c)];
                T* p = h.ptr() + (int64_t(n) * C + c) * spatial;
                for (int64_t i = 0; i < spatial; ++i) p[i] += b;
            }
    }

    int in_ch_ = 0, out_ch_ = 0;
    bool has_temb_ = false;
    bool has_norm_ = true;
    GroupNorm<T> gn1_;
    SiLU<T> act1_;
    Conv3d<T> conv1_;
    GroupNorm<T> gn2_;
    SiLU<T> act2_;
    Conv3d<T> conv2_;
    Linear<T> temb_proj_;
    Conv3d<T> skip_;
};

}  // namespace ltree::nn
