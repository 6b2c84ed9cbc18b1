#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace ltree::cfg {

// Every artifact gets a sidecar manifest recording what produced it:
// resolved config, config hash, seed, source revision, wall time, and the
// hashes of the outputs, so any artifact can be reproduced from its manifest.
struct Manifest {
    std::string subcommand;
    nlohmann::json resolved_config;
    std::string config_hash;
    uint64_t seed = 0;
    double wall_ms = 0.0;
    std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256

    void add_output(const std::string& path);
    void write(const std::string& path) const;
};

std::string source_revision();

}  // namespace ltree::cfg
