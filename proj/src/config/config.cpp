#include "ltree/config/config.hpp"

#include <filesystem>
#include <stdexcept>

#include "ltree/config/yaml.hpp"
#include "ltree/core/binio.hpp"

namespace ltree::cfg {

using nlohmann::json;

namespace {

// Schema walk: every provided key must exist in the defaults tree.
void check_unknown_keys(const json& provided, const json& schema, const std::string& prefix,
                        std::vector<std::string>& violations) {
    if (!provided.is_object()) return;
    for (auto it = provided.begin(); it != provided.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key())) {
            violations.push_back("unknown key: " + path);
            continue;
        }
        if (it.value().is_object()) check_unknown_keys(it.value(), schema.at(it.key()), path, violations);
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json RunConfig::resolved_json() const {
    json j;
    j["levels"] = levels;
    j["resolutions"] = resolutions;
    j["factors"] = factors;
    j["latent_channels"] = latent_channels;
    j["tau"] = tau;
    j["voxel_size"] = voxel_size;
    j["overlap_fraction"] = overlap_fraction;
    j["seed"] = seed;
    j["codec"] = {{"width", codec.width},         {"groups", codec.groups},
                  {"patch_size", codec.patch_size}, {"batch_size", codec.batch_size},
                  {"lr", codec.lr},               {"steps", codec.steps},
                  {"augment", codec.augment}};
    j["diffusion"] = {{"base_width", diffusion.base_width},
                      {"channel_mults", diffusion.channel_mults},
                      {"groups", diffusion.groups},
                      {"sin_dim", diffusion.sin_dim},
                      {"temb_dim", diffusion.temb_dim},
                      {"patch_sizes", diffusion.patch_sizes},
                      {"batch_size", diffusion.batch_size},
                      {"lr", diffusion.lr},
                      {"steps", diffusion.steps},
                      {"timesteps", diffusion.timesteps},
                      {"schedule", diffusion.schedule},
                      {"augment", diffusion.augment}};
    j["sampler"] = {{"kind", sampler.kind}, {"steps", sampler.steps}};
    j["paths"] = {{"data_dir", paths.data_dir}, {"out_dir", paths.out_dir}};
    return j;
}

std::string RunConfig::config_hash() const { return io::sha256_hex(resolved_json().dump()); }

RunConfig config_from_json(const json& provided) {
    RunConfig cfg;
    std::vector<std::string> violations;
    check_unknown_keys(provided, cfg.resolved_json(), "", violations);

    try {
        read_field(provided, "levels", cfg.levels);
        read_field(provided, "resolutions", cfg.resolutions);
        read_field(provided, "factors", cfg.factors);
        read_field(provided, "latent_channels", cfg.latent_channels);
        read_field(provided, "tau", cfg.tau);
        read_field(provided, "voxel_size", cfg.voxel_size);
        read_field(provided, "overlap_fraction", cfg.overlap_fraction);
        read_field(provided, "seed", cfg.seed);
        if (provided.contains("codec")) {
            const json& c = provided.at("codec");
            read_field(c, "width", cfg.codec.width);
            read_field(c, "groups", cfg.codec.groups);
            read_field(c, "patch_size", cfg.codec.patch_size);
            read_field(c, "batch_size", cfg.codec.batch_size);
            read_field(c, "lr", cfg.codec.lr);
            read_field(c, "steps", cfg.codec.steps);
            read_field(c, "augment", cfg.codec.augment);
        }
        if (provided.contains("diffusion")) {
            const json& d = provided.at("diffusion");
            read_field(d, "base_width", cfg.diffusion.base_width);
            read_field(d, "channel_mults", cfg.diffusion.channel_mults);
            read_field(d, "groups", cfg.diffusion.groups);
            read_field(d, "sin_dim", cfg.diffusion.sin_dim);
            read_field(d, "temb_dim", cfg.diffusion.temb_dim);
            read_field(d, "patch_sizes", cfg.diffusion.patch_sizes);
            read_field(d, "batch_size", cfg.diffusion.batch_size);
            read_field(d, "lr", cfg.diffusion.lr);
            read_field(d, "steps", cfg.diffusion.steps);
            read_field(d, "timesteps", cfg.diffusion.timesteps);
            read_field(d, "schedule", cfg.diffusion.schedule);
            read_field(d, "augment", cfg.diffusion.augment);
        }
        if (provided.contains("sampler")) {
            const json& s = provided.at("sampler");
            read_field(s, "kind", cfg.sampler.kind);
            read_field(s, "steps", cfg.sampler.steps);
        }
        if (provided.contains("paths")) {
            const json& p = provided.at("paths");
            read_field(p, "data_dir", cfg.paths.data_dir);
            read_field(p, "out_dir", cfg.paths.out_dir);
        }
    } catch (const json::exception& e) {
        violations.push_back(std::string("type error: ") + e.what());
    }

    // Derived default: synthesis/training patch per level follows the ladder.
    if (cfg.diffusion.patch_sizes.empty() && cfg.levels >= 2)
        cfg.diffusion.patch_sizes.assign(cfg.resolutions.begin(),
                                         cfg.resolutions.begin() + (cfg.levels - 1));

    // Consistency rules.
    if (cfg.levels < 2) violations.push_back("levels must be >= 2");
    if (int(cfg.resolutions.size()) != cfg.levels)
        violations.push_back("resolutions must list one entry per level (" +
                             std::to_string(cfg.levels) + ")");
    if (int(cfg.factors.size()) != cfg.levels - 1)
        violations.push_back("factors must list levels-1 entries");
    if (int(cfg.resolutions.size()) == cfg.levels && int(cfg.factors.size()) == cfg.levels - 1) {
        for (int i = 0; i + 1 < cfg.levels; ++i) {
            const int expect = cfg.resolutions[size_t(i)] * cfg.factors[size_t(i)];
            if (expect != cfg.resolutions[size_t(i) + 1])
                violations.push_back(
                    "ladder/factor mismatch at level " + std::to_string(i + 1) + ": " +
                    std::to_string(cfg.resolutions[size_t(i)]) + " * " +
                    std::to_string(cfg.factors[size_t(i)]) + " = " + std::to_string(expect) +
                    " but resolutions[" + std::to_string(i + 1) + "] = " +
                    std::to_string(cfg.resolutions[size_t(i) + 1]));
        }
    }
    if (int(cfg.diffusion.patch_sizes.size()) != cfg.levels - 1)
        violations.push_back("diffusion.patch_sizes must list levels-1 entries");
    if (!(cfg.tau > 0)) violations.push_back("tau must be > 0");
    if (!(cfg.voxel_size > 0)) violations.push_back("voxel_size must be > 0");
    if (!(cfg.overlap_fraction > 0 && cfg.overlap_fraction < 1))
        violations.push_back("overlap_fraction must be in (0,1)");
    if (cfg.sampler.kind != "ddim" && cfg.sampler.kind != "ddpm")
        violations.push_back("sampler.kind must be ddim or ddpm");
    if (cfg.diffusion.schedule != "cosine" && cfg.diffusion.schedule != "linear")
        violations.push_back("diffusion.schedule must be cosine or linear");
    if (cfg.sampler.steps < 1 || cfg.sampler.steps > cfg.diffusion.timesteps)
        violations.push_back("sampler.steps must be in [1, diffusion.timesteps]");
    for (int f : cfg.factors)
        if (cfg.codec.patch_size % std::max(f, 1) != 0)
            violations.push_back("codec.patch_size must be divisible by every factor");
    for (const std::string& p : {cfg.paths.data_dir, cfg.paths.out_dir})
        if (!p.empty() && !std::filesystem::exists(p))
            violations.push_back("path does not exist: " + p);

    if (!violations.empty()) {
        std::string msg = "invalid config (" + std::to_string(violations.size()) + " problems):";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw std::invalid_argument(msg);
    }
    return cfg;
}

RunConfig validate_config(const std::string& path) {
    return config_from_json(parse_yaml_file(path));
}

}  // namespace ltree::cfg
