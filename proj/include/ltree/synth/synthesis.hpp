#pragma once

#include <functional>
#include <memory>
#include <string>

#include "ltree/diffusion/sampler.hpp"
#include "ltree/synth/patch_schedule.hpp"
#include "ltree/tree/latent_tree.hpp"

namespace ltree::synth {

// Growing model-space canvas for the level being synthesized.
struct SceneCanvas {
    nn::Tensor<float> z;  // [1, C, ez, ey, ex], standardized values
    Grid3f coverage;      // nonzero = generated or seeded

    SceneCanvas() = default;
    SceneCanvas(int channels, const int extent[3])
        : z({1, channels, extent[2], extent[1], extent[0]}),
          coverage(extent[0], extent[1], extent[2], 0.f) {}
};

struct SynthConfig {
    diff::SamplerConfig sampler;
    double overlap_fraction = 0.5;
    std::vector<int> patch_sizes;  // patch edge per level (index level-1)
    bool sequential_refine = false;
    std::string journal_path;  // NDJSON progress records, "" = disabled
};

// Masked reverse diffusion for one placement (the known region is re-noised
// from the canvas each step and substituted, so at t=0 known voxels equal
// the canvas bitwise). Returns the placement's model-space values.
// rng: reverse-process noise, consumed exactly like sample_patch.
// rng_known: independent stream for noising the known content.
nn::Tensor<float> inpaint_patch(const diff::Denoiser& denoiser, const diff::NoiseSchedule& sched,
                                const PatchPlacement& placement, const SceneCanvas& canvas,
                                const nn::Tensor<float>* cond, const diff::SamplerConfig& sampler,
                                Rng& rng, Rng& rng_known);

// Order-independent overlap averaging: contributions are accumulated in a
// fixed placement-offset order, then divided by per-voxel counts.
nn::Tensor<float> aggregate_patches(const int extent[3], int channels,
                                    const std::vector<const PatchPlacement*>& placements,
                                    const std::vector<nn::Tensor<float>>& values);

// Per-placement / per-step rng stream derivation. These are part of the
// reproducibility contract: a placement's stream depends only on the run
// seed and its own identity, never on scheduling.
Rng coarse_patch_rng(uint64_t seed, int placement);
Rng coarse_known_rng(uint64_t seed, int placement);
Rng refine_init_rng(uint64_t seed, int level);
Rng refine_step_rng(uint64_t seed, int level, int placement, int t);
Rng refine_known_rng(uint64_t seed, int level, int t);

struct SceneModels {
    std::vector<tree::LevelCodec> codecs;                       // levels 1..N-1
    std::vector<std::unique_ptr<diff::UNetDenoiser>> denoisers; // levels 1..N-1
    int levels() const { return int(codecs.size()) + 1; }
};

// Coarsest level: breadth-first autoregressive inpainting over the schedule;
// returns the destandardized geometry/latent pair.
std::pair<TUDFGrid, LatentGrid> generate_coarse(const diff::UNetDenoiser& denoiser,
                                                const int extent[3], const SynthConfig& cfg,
                                                uint64_t seed, float voxel_size, const Vec3& origin,
                                                const Grid3f* seed_coverage = nullptr,
                                                const SceneCanvas* seed_canvas = nullptr);

// One refinement level: decode the previous level, then denoise all patches
// in lockstep per timestep with overlap averaging (or patch-by-patch
// inpainting when cfg.sequential_refine is set).
std::pair<TUDFGrid, LatentGrid> refine_level(const diff::UNetDenoiser& denoiser,
                                             const tree::LevelCodec& codec, const TUDFGrid& L_prev,
                                             const LatentGrid& H_prev, const SynthConfig& cfg,
                                             uint64_t seed);

// Full pipeline: coarse generation, alternating decode/refine, final decode.
// extent_level1 is the level-1 grid extent (z must equal the level-1 patch).
TUDFGrid generate_scene(const SceneModels& models, const int extent_level1[3],
                        const SynthConfig& cfg, uint64_t seed, float root_voxel_size,
                        const Vec3& origin);

struct CompletionInput {
    TUDFGrid partial;   // known content; voxels outside the mask are ignored
    Grid3f known_mask;  // nonzero = known, same dims as partial
    int target_extent_level1[3] = {0, 0, 0};
};

// Seeds the coarse canvas with the encoded partial scene, generates the
// remaining placements, then refines with conditioning only. The known mask
// must be constant over each cumulative-factor block.
TUDFGrid complete_scene(const SceneModels& models, const CompletionInput& input,
                        const SynthConfig& cfg, uint64_t seed);

}  // namespace ltree::synth
