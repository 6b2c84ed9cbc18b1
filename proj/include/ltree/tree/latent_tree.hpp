#pragma once

#include <string>
#include <vector>

#include "ltree/tree/codec.hpp"

namespace ltree::tree {

// Ordered hierarchy {L_1, H_1, ..., L_{N-1}, H_{N-1}} plus root metadata.
// Index k holds level k+1's pair. The root (level N) is not stored; it is
// recovered by chained decoding.
struct LatentTree {
    int levels = 0;  // N
    std::vector<int> factors;
    int latent_channels = 0;
    float tau = 0.f;
    float root_voxel_size = 0.f;
    Vec3 origin;
    int root_dims[3] = {0, 0, 0};  // padded dims of L_N
    int orig_dims[3] = {0, 0, 0};  // scene dims before padding
    std::vector<TUDFGrid> L;
    std::vector<LatentGrid> H;

    int cumulative_factor() const {
        int f = 1;
        for (int v : factors) f *= v;
        return f;
    }
};

// Validates that the stack is a contiguous ladder (levels 1..N-1 with
// matching tau and channels).
void validate_codec_stack(const std::vector<LevelCodec>& codecs);

// Pads with tau up to divisibility by the cumulative factor (recorded in the
// tree metadata), then encodes level by level from the root down.
LatentTree build_tree(const std::vector<LevelCodec>& codecs, const TUDFGrid& scene);

// Chained decode from level 1 up to the root; result cropped to the
// original (pre-padding) dims.
TUDFGrid reconstruct(const std::vector<LevelCodec>& codecs, const LatentTree& tree);

TUDFGrid pad_to_multiple(const TUDFGrid& scene, int multiple);

// .lt3 container, little-endian f32 arrays.
void save_tree(const std::string& path, const LatentTree& tree);
LatentTree load_tree(const std::string& path);

}  // namespace ltree::tree
