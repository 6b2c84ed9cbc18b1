#pragma once

#include <memory>

#include "ltree/diffusion/denoiser.hpp"
#include "ltree/diffusion/sampler.hpp"
#include "ltree/tree/train.hpp"

namespace ltree::diff {

struct DiffusionTrainConfig {
    int level = 1;
    int patch_size = 8;  // patch edge at the model's level
    int batch_size = 8;
    double lr = 1e-4;
    int64_t steps = 2000;
    ScheduleFamily family = ScheduleFamily::Cosine;
    int timesteps = 1000;
    int base_width = 16;
    std::vector<int> channel_mults = {1, 2, 2};
    int groups = 8;
    int sin_dim = 16;
    int temb_dim = 32;
    bool augment_data = true;
    uint64_t seed = 0;
    std::string log_path;
    std::string state_dir;
    int64_t checkpoint_every = 0;
};

struct DiffusionTrainResult {
    std::unique_ptr<UNetDenoiser> denoiser;
    std::vector<double> loss_curve;
    std::vector<double> ema_curve;
    double final_ema = -1.0;
};

// One training sample drawn on the fly: a root crop is augmented and encoded
// down through the codecs to the requested level. z0 is standardized; the
// condition stays in raw geometry units.
struct PatchDraw {
    nn::Tensor<float> z0;    // [1, zc, p, p, p]
    nn::Tensor<float> cond;  // [1, 1, p, p, p]; empty at level 1
};

PatchDraw draw_latent_patch(const std::vector<tree::LevelCodec>& codecs,
                            const std::vector<tree::ScenePyramid>& pyramids, int level,
                            int patch_size, bool augment, Rng& rng);

// Builds the standardization stats for a level's denoiser from its codec.
DenoiserConfig make_denoiser_config(const std::vector<tree::LevelCodec>& codecs,
                                    const DiffusionTrainConfig& cfg);

// Epsilon-prediction training (MSE against the drawn noise), with latents
// inferred on the fly from the codecs. Resumes from state_dir when present.
DiffusionTrainResult train_denoiser(const std::vector<tree::LevelCodec>& codecs,
                                    const std::vector<TUDFGrid>& scenes,
                                    const DiffusionTrainConfig& cfg);

}  // namespace ltree::diff
