#pragma once

#include "ltree/tree/train.hpp"

namespace ltree::tree {

// Cascaded-latent baseline: each level compresses the whole grid through a
// learned latent (no pooled geometry pass-through). Channel count matches
// the tree codec's per-voxel storage (1 + C) so the comparison runs at an
// equal parameter and storage budget.
class CascadedCodec {
public:
    CascadedCodec() = default;
    CascadedCodec(const LevelCodecConfig& cfg)
        : config(cfg),
          encoder("cm_enc", 1, cfg.latent_channels + 1, cfg.width, cfg.factor, cfg.groups,
                  1.f / cfg.tau),
          decoder("cm_dec", cfg.latent_channels + 1, 1, cfg.width, cfg.factor, cfg.groups,
                  1.f, cfg.tau) {}

    void init(Rng& rng) {
        encoder.init(rng);
        decoder.init(rng);
    }

    int64_t param_count() { return encoder.param_count() + decoder.param_count(); }

    LevelCodecConfig config;
    EncoderNet<float> encoder;
    DecoderNet<float> decoder;
};

struct CascadedTrainResult {
    CascadedCodec codec;
    std::vector<double> loss_curve;
    std::vector<double> ema_curve;
};

// Same data pipeline and budget as train_level_codec, different wiring.
CascadedTrainResult train_cascaded_codec(int level, const std::vector<ScenePyramid>& train,
                                         const CodecTrainConfig& cfg);

double cascaded_recon_error(const CascadedCodec& codec,
                            const std::vector<ScenePyramid>& pyramids);

}  // namespace ltree::tree
