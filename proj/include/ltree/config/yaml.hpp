#pragma once

#include <json.hpp>

#include <string>

namespace ltree::cfg {

// Minimal YAML subset sufficient for declarative run configs: nested maps by
// two-space indentation, scalar values (int / float / bool / string), inline
// flow lists of scalars, and '#' comments. Anchors, multi-line strings and
// block lists are out of scope.
nlohmann::json parse_yaml(const std::string& text);
nlohmann::json parse_yaml_file(const std::string& path);

}  // namespace ltree::cfg
