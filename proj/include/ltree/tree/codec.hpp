#pragma once

#include <string>
#include <utility>

#include "ltree/core/grid.hpp"
#include "ltree/core/rng.hpp"
#include "ltree/nn/tensor.hpp"
#include "ltree/tree/codec_nets.hpp"

namespace ltree::tree {

struct LevelCodecConfig {
    int level = 1;  // this codec maps level+1 <-> level
    int factor = 2;
    int latent_channels = 4;
    int width = 16;
    int groups = 0;  // 0 = norm-free blocks (required for seam-free tiling)
    float tau = 0.1f;
};

// Per-channel standardization statistics gathered after codec training;
// diffusion operates in the standardized space.
struct LatentStats {
    std::vector<float> mean, std;
    float geom_mean = 0.f;
    float geom_std = 1.f;
};

class LevelCodec {
public:
    LevelCodec() = default;
    explicit LevelCodec(const LevelCodecConfig& cfg)
        : config(cfg),
          encoder("enc", 1, cfg.latent_channels, cfg.width, cfg.factor, cfg.groups,
                  1.f / cfg.tau),
          decoder("dec", 1 + cfg.latent_channels, 1, cfg.width, cfg.factor, cfg.groups,
                  1.f / cfg.tau, cfg.tau) {
        stats.mean.assign(size_t(cfg.latent_channels), 0.f);
        stats.std.assign(size_t(cfg.latent_channels), 1.f);
    }

    void init(Rng& rng) {
        encoder.init(rng);
        decoder.init(rng);
    }

    int64_t param_count() {
        return const_cast<EncoderNet<float>&>(encoder).param_count() +
               const_cast<DecoderNet<float>&>(decoder).param_count();
    }

    LevelCodecConfig config;
    EncoderNet<float> encoder;
    DecoderNet<float> decoder;
    LatentStats stats;
    double plateau_loss = -1.0;    // smoothed training loss at the end of the run
    double test_recon_err = -1.0;  // held-out whole-patch l2, stored by the trainer
    int64_t trained_steps = 0;
};

// Exact average pooling with window f (double accumulation, linear scan).
Grid3f avg_pool_grid(const Grid3f& g, int f);
TUDFGrid avg_pool_tudf(const TUDFGrid& g, int f);

// Grid <-> tensor bridges ([1, C, nz, ny, nx], x fastest; same layout).
nn::Tensor<float> grid_to_tensor(const Grid3f& g);
nn::Tensor<float> latent_to_tensor(const LatentGrid& g);
Grid3f tensor_to_grid(const nn::Tensor<float>& t);
LatentGrid tensor_to_latent(const nn::Tensor<float>& t, int level);

// Factorizes a patch of level i+1 into the pooled geometry patch (exact
// average pooling) and the learned latent patch at level i. Patch dims must
// be divisible by the factor; there is no implicit padding here.
std::pair<TUDFGrid, LatentGrid> encode_level(const LevelCodec& codec, const TUDFGrid& patch);

// Reconstructs the level i+1 patch from [coarse, latent]; output clamped to
// [0, tau].
TUDFGrid decode_level(const LevelCodec& codec, const TUDFGrid& coarse, const LatentGrid& latent);

// Whole-scene variants: non-overlapping core tiles extended by the network
// halo, halo cropped after inference. Bitwise equal to running the net on
// the whole grid, and invariant to tile order (disjoint writes).
std::pair<TUDFGrid, LatentGrid> encode_scene(const LevelCodec& codec, const TUDFGrid& scene,
                                             int tile = 32);
TUDFGrid decode_scene(const LevelCodec& codec, const TUDFGrid& coarse, const LatentGrid& latent,
                      int tile = 16);

void save_codec(const std::string& path, LevelCodec& codec);
LevelCodec load_codec(const std::string& path);

}  // namespace ltree::tree
