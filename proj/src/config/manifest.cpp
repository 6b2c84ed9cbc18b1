#include "ltree/config/manifest.hpp"

#include "ltree/core/binio.hpp"

namespace ltree::cfg {

using nlohmann::json;

#ifndef LTREE_SOURCE_REV
#define LTREE_SOURCE_REV "unknown"
#endif

std::string source_revision() { return LTREE_SOURCE_REV; }

void Manifest::add_output(const std::string& path) {
    outputs.push_back({path, io::sha256_hex(io::read_file(path))});
}

void Manifest::write(const std::string& path) const {
    json j;
    j["subcommand"] = subcommand;
    j["config"] = resolved_config;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["source_rev"] = source_revision();
    j["wall_ms"] = wall_ms;
    json outs = json::array();
    for (const auto& [p, h] : outputs) outs.push_back({{"path", p}, {"sha256", h}});
    j["outputs"] = outs;
    io::write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ltree::cfg
