#pragma once

#include "ltree/nn/blocks.hpp"

namespace ltree::tree {

inline int halvings_for_factor(int f) {
    int k = 0, v = f;
    while (v > 1) {
        if (v % 2 != 0) throw std::invalid_argument("codec factor must be a power of two");
        v /= 2;
        ++k;
    }
    return k;
}

// Latent branch of the level codec: strided residual downsampling of a
// geometry patch to a C-channel feature grid at 1/f resolution.
template <typename T>
class EncoderNet {
public:
    EncoderNet() = default;
    EncoderNet(std::string name, int in_ch, int out_ch, int width, int factor, int groups,
               T in_scale = T(1))
        : in_ch_(in_ch), out_ch_(out_ch), factor_(factor), in_scale_(in_scale),
          conv_in_(name + ".conv_in", in_ch, width, 3) {
        const int k = halvings_for_factor(factor);
        for (int j = 0; j < k; ++j) {
            rbs_.emplace_back(name + ".rb" + std::to_string(j), width, width, groups);
            downs_.emplace_back(name + ".down" + std::to_string(j), width, width, 3, 2);
        }
        rb_final_ = nn::ResBlock3d<T>(name + ".rb_final", width, width, groups);
        head_ = nn::Conv3d<T>(name + ".head", width, out_ch, 3);
    }

    void init(Rng& rng) {
        conv_in_.init_he(rng);
        for (auto& rb : rbs_) rb.init(rng);
        for (auto& d : downs_) d.init_he(rng);
        rb_final_.init(rng);
        head_.init_he(rng);
    }

    nn::Tensor<T> forward(const nn::Tensor<T>& x) {
        auto scaled = x;
        scaled *= in_scale_;
        auto h = conv_in_.forward(scaled);
        for (size_t j = 0; j < rbs_.size(); ++j) {
            h = rbs_[j].forward(h);
            h = downs_[j].forward(h);
        }
        h = rb_final_.forward(h);
        return head_.forward(h);
    }

    nn::Tensor<T> infer(const nn::Tensor<T>& x) const {
        auto scaled = x;
        scaled *= in_scale_;
        auto h = conv_in_.infer(scaled);
        for (size_t j = 0; j < rbs_.size(); ++j) {
            h = rbs_[j].infer(h);
            h = downs_[j].infer(h);
        }
        h = rb_final_.infer(h);
        return head_.infer(h);
    }

    void backward(const nn::Tensor<T>& gout) {
        auto g = head_.backward(gout);
        g = rb_final_.backward(g);
        for (size_t j = rbs_.size(); j > 0; --j) {
            g = downs_[j - 1].backward(g);
            g = rbs_[j - 1].backward(g);
        }
        conv_in_.backward(g);
    }

    void collect(nn::ParamRefs<T>& out) {
        conv_in_.collect(out);
        for (auto& rb : rbs_) rb.collect(out);
        for (auto& d : downs_) d.collect(out);
        rb_final_.collect(out);
        head_.collect(out);
    }

    int64_t param_count() {
        nn::ParamRefs<T> refs;
        collect(refs);
        int64_t n = 0;
        for (auto* p : refs) n += p->value.numel();
        return n;
    }

    // Input-voxel halo that makes core outputs independent of content beyond
    // the extended tile (tracks each conv's reach at its running stride).
    int input_halo() const {
        int r = 0, s = 1;
        r += s;  // conv_in
        for (size_t j = 0; j < rbs_.size(); ++j) {
            r += 2 * s;  // residual block, two k3 convs
            r += s;      // strided conv
            s *= 2;
        }
        r += 2 * s;  // final residual block
        r += s;      // head
        // Round up so the cropped latent region stays f-aligned.
        return ((r + factor_ - 1) / factor_) * factor_;
    }

    int factor() const { return factor_; }
    int out_channels() const { return out_ch_; }

private:
    int in_ch_ = 1, out_ch_ = 4, factor_ = 2;
    T in_scale_ = T(1);
    nn::Conv3d<T> conv_in_;
    std::vector<nn::ResBlock3d<T>> rbs_;
    std::vector<nn::Conv3d<T>> downs_;
    nn::ResBlock3d<T> rb_final_;
    nn::Conv3d<T> head_;
};

// Decoder: residual blocks with nearest-neighbor upsampling back to the
// finer level; emits a raw 1-channel field (the clamp to [0, tau] is applied
// at inference so training gradients stay alive outside the range).
template <typename T>
class DecoderNet {
public:
    DecoderNet() = default;
    // geo_scale multiplies channel 0 of the input (the raw coarse geometry,
    // ~[0, tau], next to unit-scale latents); out_scale maps the unit-scale
    // head back to field units. Both are fixed architecture constants.
    DecoderNet(std::string name, int in_ch, int out_ch, int width, int factor, int groups,
               T geo_scale = T(1), T out_scale = T(1))
        : in_ch_(in_ch), out_ch_(out_ch), factor_(factor), geo_scale_(geo_scale),
          out_scale_(out_scale), conv_in_(name + ".conv_in", in_ch, width, 3),
          rb_in_(name + ".rb_in", width, width, groups) {
        const int k = halvings_for_factor(factor);
        for (int j = 0; j < k; ++j) {
            ups_.emplace_back(2);
            up_convs_.emplace_back(name + ".up" + std::to_string(j), width, width, 3);
            rbs_.emplace_back(name + ".rb" + std::to_string(j), width, width, groups);
        }
        head_ = nn::Conv3d<T>(name + ".head", width, out_ch, 3);
    }

    void init(Rng& rng) {
        conv_in_.init_he(rng);
        rb_in_.init(rng);
        for (auto& c : up_convs_) c.init_he(rng);
        for (auto& rb : rbs_) rb.init(rng);
        head_.init_he(rng);
    }

    nn::Tensor<T> forward(const nn::Tensor<T>& x) {
        auto h = rb_in_.forward(conv_in_.forward(scale_input(x)));
        for (size_t j = 0; j < rbs_.size(); ++j) {
            h = up_convs_[j].forward(ups_[j].forward(h));
            h = rbs_[j].forward(h);
        }
        auto out = head_.forward(h);
        out *= out_scale_;
        return out;
    }

    nn::Tensor<T> infer(const nn::Tensor<T>& x) const {
        auto h = rb_in_.infer(conv_in_.infer(scale_input(x)));
        for (size_t j = 0; j < rbs_.size(); ++j) {
            h = up_convs_[j].infer(ups_[j].infer(h));
            h = rbs_[j].infer(h);
        }
        auto out = head_.infer(h);
        out *= out_scale_;
        return out;
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& gout) {
        auto g = gout;
        g *= out_scale_;
        g = head_.backward(g);
        for (size_t j = rbs_.size(); j > 0; --j) {
            g = rbs_[j - 1].backward(g);
            g = ups_[j - 1].backward(up_convs_[j - 1].backward(g));
        }
        auto gin = conv_in_.backward(rb_in_.backward(g));
        // Undo the channel-0 input scale on the returned gradient.
        if (geo_scale_ != T(1)) {
            const int64_t spatial = gin.numel() / (int64_t(gin.dim(0)) * gin.dim(1));
            for (int n = 0; n < gin.dim(0); ++n) {
                T* p = gin.ptr() + int64_t(n) * gin.dim(1) * spatial;
                for (int64_t i = 0; i < spatial; ++i) p[i] *= geo_scale_;
            }
        }
        return gin;
    }

    void collect(nn::ParamRefs<T>& out) {
        conv_in_.collect(out);
        rb_in_.collect(out);
        for (auto& c : up_convs_) c.collect(out);
        for (auto& rb : rbs_) rb.collect(out);
        head_.collect(out);
    }

    int64_t param_count() {
        nn::ParamRefs<T> refs;
        collect(refs);
        int64_t n = 0;
        for (auto* p : refs) n += p->value.numel();
        return n;
    }

    // Halo in coarse input voxels; fine-resolution convs contribute 1/2^j.
    int input_halo() const {
        double r = 0.0, s = 1.0;
        r += s;      // conv_in
        r += 2 * s;  // rb_in
        for (size_t j = 0; j < rbs_.size(); ++j) {
            s *= 0.5;
            r += s;      // up conv
            r += 2 * s;  // residual block
        }
        r += s;  // head
        return int(std::ceil(r));
    }

    int factor() const { return factor_; }

private:
    nn::Tensor<T> scale_input(const nn::Tensor<T>& x) const {
        if (geo_scale_ == T(1)) return x;
        auto scaled = x;
        const int64_t spatial = x.numel() / (int64_t(x.dim(0)) * x.dim(1));
        for (int n = 0; n < x.dim(0); ++n) {
            T* p = scaled.ptr() + int64_t(n) * x.dim(1) * spatial;
            for (int64_t i = 0; i < spatial; ++i) p[i] *= geo_scale_;
        }
        return scaled;
    }

    int in_ch_ = 5, out_ch_ = 1, factor_ = 2;
    T geo_scale_ = T(1), out_scale_ = T(1);
    nn::Conv3d<T> conv_in_;
    nn::ResBlock3d<T> rb_in_;
    std::vector<nn::UpsampleNearest<T>> ups_;
    std::vector<nn::Conv3d<T>> up_convs_;
    std::vector<nn::ResBlock3d<T>> rbs_;
    nn::Conv3d<T> head_;
};

}  // namespace ltree::tree
