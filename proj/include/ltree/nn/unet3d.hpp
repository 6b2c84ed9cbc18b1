#pragma once

#include "ltree/nn/blocks.hpp"

namespace ltree::nn {

struct UNet3dConfig {
    int in_channels = 1;
    int out_channels = 1;
    int base_width = 32;
    std::vector<int> channel_mults = {1, 2, 2};
    int groups = 8;
    int sin_dim = 32;
    int temb_dim = 64;

    int stages() const { return int(channel_mults.size()); }
    int downsample_factor() const { return 1 << (stages() - 1); }
    int width(int stage) const { return base_width * channel_mults[size_t(stage)]; }
};

// Volumetric UNet with residual blocks and per-block time bias. The final
// conv is zero-initialized so an untrained net predicts exactly zero.
template <typename T>
class UNet3d {
public:
    UNet3d() = default;
    explicit UNet3d(const UNet3dConfig& cfg) : cfg_(cfg) {
        const int n = cfg.stages();
        temb_ = TimeEmbedding<T>("temb", cfg.sin_dim, cfg.temb_dim);
        conv_in_ = Conv3d<T>("conv_in", cfg.in_channels, cfg.width(0), 3);
        for (int i = 0; i < n; ++i) {
            rb_down_.emplace_back("down" + std::to_string(i) + ".rb", cfg.width(i), cfg.width(i),
                                  cfg.groups, cfg.temb_dim);
            if (i + 1 < n)
                down_.emplace_back("down" + std::to_string(i) + ".conv", cfg.width(i),
                                   cfg.width(i + 1), 3, 2);
        }
        rb_mid1_ = ResBlock3d<T>("mid.rb1", cfg.width(n - 1), cfg.width(n - 1), cfg.groups,
                                 cfg.temb_dim);
        rb_mid2_ = ResBlock3d<T>("mid.rb2", cfg.width(n - 1), cfg.width(n - 1), cfg.groups,
                                 cfg.temb_dim);
        for (int i = n - 2; i >= 0; --i) {
            up_.emplace_back(2);
            up_conv_.emplace_back("up" + std::to_string(i) + ".conv", cfg.width(i + 1),
                                  cfg.width(i), 3);
            rb_up_.emplace_back("up" + std::to_string(i) + ".rb", 2 * cfg.width(i), cfg.width(i),
                                cfg.groups, cfg.temb_dim);
        }
        gn_out_ = GroupNorm<T>("out.gn", cfg.width(0), cfg.groups);
        conv_out_ = Conv3d<T>("out.conv", cfg.width(0), cfg.out_channels, 3);
    }

    void init(Rng& rng) {
        temb_.init(rng);
        conv_in_.init_he(rng);
        for (auto& rb : rb_down_) rb.init(rng);
        for (auto& c : down_) c.init_he(rng);
        rb_mid1_.init(rng);
        rb_mid2_.init(rng);
        for (auto& c : up_conv_) c.init_he(rng);
        for (auto& rb : rb_up_) rb.init(rng);
        conv_out_.init_zero();
    }

    const UNet3dConfig& config() const { return cfg_; }

    Tensor<T> forward(const Tensor<T>& x, const std::vector<int>& t) {
        check_input(x);
        const int n = cfg_.stages();
        temb_out_ = temb_.forward(t);
        skips_.clear();
        auto h = conv_in_.forward(x);
        for (int i = 0; i < n; ++i) {
            h = rb_down_[size_t(i)].forward(h, &temb_out_);
            if (i + 1 < n) {
                skips_.push_back(h);
                h = down_[size_t(i)].forward(h);
            }
        }
        h = rb_mid1_.forward(h, &temb_out_);
        h = rb_mid2_.forward(h, &temb_out_);
        for (size_t u = 0; u < rb_up_.size(); ++u) {
            h = up_conv_[u].forward(up_[u].forward(h));
            h = concat_channels(skips_[skips_.size() - 1 - u], h);
            h = rb_up_[u].forward(h, &temb_out_);
        }
        return conv_out_.forward(act_out_.forward(gn_out_.forward(h)));
    }

    Tensor<T> infer(const Tensor<T>& x, const std::vector<int>& t) const {
        check_input(x);
        const int n = cfg_.stages();
        auto temb = temb_.infer(t);
        std::vector<Tensor<T>> skips;
        auto h = conv_in_.infer(x);
        for (int i = 0; i < n; ++i) {
            h = rb_down_[size_t(i)].infer(h, &temb);
            if (i + 1 < n) {
                skips.push_back(h);
                h = down_[size_t(i)].infer(h);
            }
        }
        h = rb_mid1_.infer(h, &temb);
        h = rb_mid2_.infer(h, &temb);
        for (size_t u = 0; u < rb_up_.size(); ++u) {
            h = up_conv_[u].infer(up_[u].infer(h));
            h = concat_channels(skips[skips.size() - 1 - u], h);
            h = rb_up_[u].infer(h, &temb);
        }
        return conv_out_.infer(act_out_.infer(gn_out_.infer(h)));
    }

    void backward(const Tensor<T>& gout) {
        Tensor<T> gtemb = Tensor<T>::zeros_like(temb_out_);
        auto g = gn_out_.backward(act_out_.backward(conv_out_.backward(gout)));
        std::vector<Tensor<T>> skip_grads(skips_.size());
        for (size_t u = rb_up_.size(); u > 0; --u) {
            const size_t ui = u - 1;
            g = rb_up_[ui].backward(g, &gtemb);
            auto [g_skip, g_h] = split_channels(g, skips_[skips_.size() - 1 - ui].dim(1));
            skip_grads[skips_.size() - 1 - ui] = std::move(g_skip);
            g = up_[ui].backward(up_conv_[ui].backward(g_h));
        }
        g = rb_mid2_.backward(g, &gtemb);
        g = rb_mid1_.backward(g, &gtemb);
        const int n = cfg_.stages();
        for (int i = n - 1; i >= 0; --i) {
            if (i + 1 < n) {
                g = down_[size_t(i)].backward(g);
                g += skip_grads[size_t(i)];
            }
            g = rb_down_[size_t(i)].backward(g, &gtemb);
        }
        conv_in_.backward(g);
        temb_.backward(gtemb);
    }

    void collect(ParamRefs<T>& out) {
        temb_.collect(out);
        conv_in_.collect(out);
        for (auto& rb : rb_down_) rb.collect(out);
        for (auto& c : down_) c.collect(out);
        rb_mid1_.collect(out);
        rb_mid2_.collect(out);
        for (auto& c : up_conv_) c.collect(out);
        for (auto& rb : rb_up_) rb.collect(out);
        gn_out_.collect(out);
        conv_out_.collect(out);
    }

    int64_t param_count() {
        ParamRefs<T> refs;
        collect(refs);
        int64_t n = 0;
        for (auto* p : refs) n += p->value.numel();
        return n;
    }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.shape.size() != 5 || x.dim(1) != cfg_.in_channels)
            throw std::invalid_argument("UNet3d: bad input shape");
        const int f = cfg_.downsample_factor();
        for (int i : {2, 3, 4})
            if (x.dim(i) % f != 0)
                throw std::invalid_argument("UNet3d: spatial dims must be divisible by " +
                                            std::to_string(f));
    }

    UNet3dConfig cfg_;
    TimeEmbedding<T> temb_;
    Conv3d<T> conv_in_;
    std::vector<ResBlock3d<T>> rb_down_;
    std::vector<Conv3d<T>> down_;
    ResBlock3d<T> rb_mid1_, rb_mid2_;
    std::vector<UpsampleNearest<T>> up_ = {};
    std::vector<Conv3d<T>> up_conv_;
    std::vector<ResBlock3d<T>> rb_up_;
    GroupNorm<T> gn_out_;
    SiLU<T> act_out_;
    Conv3d<T> conv_out_;

    // forward caches
    Tensor<T> temb_out_;
    std::vector<Tensor<T>> skips_;
};

}  // namespace ltree::nn
