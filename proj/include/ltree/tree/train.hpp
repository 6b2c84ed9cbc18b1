#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ltree/tree/latent_tree.hpp"

namespace ltree::tree {

// Geometry pyramid of one scene: index l-1 holds the level-l grid
// (level N = padded root), produced by repeated exact average pooling.
struct ScenePyramid {
    std::vector<Grid3f> levels;
    float tau = 0.f;

    const Grid3f& level(int l) const { return levels[size_t(l - 1)]; }
};

ScenePyramid build_pyramid(const TUDFGrid& scene, const std::vector<int>& factors);

struct CodecTrainConfig {
    int levels = 3;
    std::vector<int> factors = {2, 4};
    int latent_channels = 4;
    int width = 16;
    int groups = 0;
    float tau = 0.1f;
    int patch_size = 32;      // training crop edge at the codec's input level
    int batch_size = 4;
    double lr = 1e-4;
    int64_t steps = 2000;
    bool augment_data = true;
    uint64_t seed = 0;
    int stats_patches = 64;
    std::string log_path;         // NDJSON per-step records, appended
    std::string state_dir;        // resumable training state, "" = disabled
    int64_t checkpoint_every = 0; // state flush interval in steps, 0 = final only

    void validate() const;
};

struct CodecTrainResult {
    LevelCodec codec;
    std::vector<double> loss_curve;
    std::vector<double> ema_curve;
};

// Trains the codec for one level (input = level `level`+1 grids). Resumes
// from state_dir if a matching state file exists.
CodecTrainResult train_level_codec(int level, const std::vector<ScenePyramid>& train,
                                   const std::vector<ScenePyramid>& test,
                                   const CodecTrainConfig& cfg);

// Trains all N-1 level codecs independently on randomly cropped, augmented
// patches, minimizing mean squared reconstruction error.
std::vector<LevelCodec> train_codecs(const std::vector<TUDFGrid>& train_scenes,
                                     const std::vector<TUDFGrid>& test_scenes,
                                     const CodecTrainConfig& cfg);

// Mean per-voxel squared reconstruction error of encode+decode at one level
// over the given pyramids.
double level_recon_error(const LevelCodec& codec, const std::vector<ScenePyramid>& pyramids);

}  // namespace ltree::tree
