#pragma once

#include <memory>
#include <string>

#include "ltree/diffusion/schedule.hpp"
#include "ltree/nn/unet3d.hpp"

namespace ltree::diff {

// A noisy patch in model (standardized) space plus its identity.
struct LatentPatch {
    enum class Kind { LatentOnly, GeometryLatent };

    nn::Tensor<float> values;  // [C, d, h, w]
    int level = 1;
    Kind kind = Kind::LatentOnly;
};

// Noise predictor interface. z_t is in model space; the optional condition
// is a raw 1-channel geometry grid (standardized inside the implementation).
// Implementations must be const-callable from multiple threads.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    // z_t: [B, C, d, h, w]; t: one timestep per batch entry; cond: [B, 1, d, h, w].
    virtual nn::Tensor<float> predict_eps(const nn::Tensor<float>& z_t, const std::vector<int>& t,
                                          const nn::Tensor<float>* cond) const = 0;

    virtual int z_channels() const = 0;
    virtual bool conditional() const = 0;
};

struct DenoiserConfig {
    int level = 1;
    int z_channels = 4;       // C, or 1 + C at the coarsest level
    bool conditional = true;  // geometry-concat conditioning
    nn::UNet3dConfig unet;
    ScheduleFamily family = ScheduleFamily::Cosine;
    int timesteps = 1000;
    float tau = 0.1f;
    // Standardization: per z channel, plus the condition / geometry channel.
    std::vector<float> z_mean, z_std;
    float cond_mean = 0.f, cond_std = 1.f;
};

class UNetDenoiser final : public Denoiser {
public:
    UNetDenoiser() = default;
    explicit UNetDenoiser(DenoiserConfig cfg);

    void init(Rng& rng) { net_.init(rng); }

    nn::Tensor<float> predict_eps(const nn::Tensor<float>& z_t, const std::vector<int>& t,
                                  const nn::Tensor<float>* cond) const override;

    int z_channels() const override { return cfg_.z_channels; }
    bool conditional() const override { return cfg_.conditional; }

    const DenoiserConfig& config() const { return cfg_; }
    DenoiserConfig& config() { return cfg_; }
    nn::UNet3d<float>& net() { return net_; }
    const nn::UNet3d<float>& net() const { return net_; }

    // Standardization helpers for the z channels (model space <-> raw).
    void standardize_z(nn::Tensor<float>& z) const;
    void destandardize_z(nn::Tensor<float>& z) const;

private:
    DenoiserConfig cfg_;
    nn::UNet3d<float> net_;
};

void save_denoiser(const std::string& path, UNetDenoiser& denoiser, int64_t trained_steps,
                   double final_ema);
std::unique_ptr<UNetDenoiser> load_denoiser(const std::string& path);

}  // namespace ltree::diff
