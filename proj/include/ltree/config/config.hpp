#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace ltree::cfg {

// Fully-resolved run configuration. Every field has a recorded default; the
// resolved form (defaults included) is persisted next to each artifact so
// runs are auditable.
struct RunConfig {
    int levels = 3;
    std::vector<int> resolutions = {16, 32, 128};  // reference chunk dims per level
    std::vector<int> factors = {2, 4};
    int latent_channels = 4;
    double tau = 0.1;
    double voxel_size = 0.022;
    double overlap_fraction = 0.5;
    uint64_t seed = 0;

    struct Codec {
        int width = 16;
        int groups = 0;  // norm-free codec blocks
        int patch_size = 32;
        int batch_size = 4;
        double lr = 1e-4;
        int64_t steps = 2000;
        bool augment = true;
    } codec;

    struct Diffusion {
        int base_width = 16;
        std::vector<int> channel_mults = {1, 2, 2};
        int groups = 8;
        int sin_dim = 16;
        int temb_dim = 32;
        std::vector<int> patch_sizes;  // per level 1..N-1; default = resolutions prefix
        int batch_size = 8;
        double lr = 1e-4;
        int64_t steps = 2000;
        int timesteps = 1000;
        std::string schedule = "cosine";
        bool augment = true;
    } diffusion;

    struct Sampler {
        std::string kind = "ddim";
        int steps = 50;
    } sampler;

    struct Paths {
        std::string data_dir;
        std::string out_dir;
    } paths;

    nlohmann::json resolved_json() const;
    std::string config_hash() const;  // sha256 of the canonical resolved form
};

// Parses, applies defaults, and validates. Unknown keys and inconsistent
// ladders are rejected; all violations are reported in one error message.
RunConfig validate_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace ltree::cfg
