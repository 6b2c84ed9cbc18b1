#pragma once

#include "ltree/diffusion/denoiser.hpp"

namespace ltree::diff {

enum class SamplerKind { Ddpm, Ddim };

SamplerKind sampler_from_string(const std::string& s);
std::string to_string(SamplerKind k);

// Descending timestep ladder for `steps`-step sampling; first entry is T and
// the implicit final target is 0.
std::vector<int> make_timesteps(int timesteps, int steps);

// One reverse update z_t -> z_{t_prev} given the model's noise prediction.
// DDIM is deterministic; DDPM draws one noise tensor from rng unless
// t_prev == 0 (no noise on the final step).
nn::Tensor<float> step_from_eps(const NoiseSchedule& sched, const nn::Tensor<float>& z_t,
                                const nn::Tensor<float>& eps, int t, int t_prev, SamplerKind kind,
                                Rng& rng);

// Predict-then-step for a single consecutive update (t -> t-1).
nn::Tensor<float> denoise_step(const Denoiser& denoiser, const NoiseSchedule& sched,
                               const nn::Tensor<float>& z_t, int t,
                               const nn::Tensor<float>* cond, SamplerKind kind, Rng& rng);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::Ddim;
    int steps = 50;
};

// Full reverse trajectory from Gaussian noise, in model space.
// shape = {1, C, d, h, w}. Deterministic given the rng seed.
nn::Tensor<float> sample_patch(const Denoiser& denoiser, const NoiseSchedule& sched,
                               const std::vector<int>& shape, const nn::Tensor<float>* cond,
                               const SamplerConfig& sampler, Rng& rng);

}  // namespace ltree::diff
