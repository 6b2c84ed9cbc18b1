#pragma once

#include <string>

#include "ltree/geometry/mesh.hpp"

namespace ltree::geo {

// ASCII OBJ / PLY, positions in meters. Format picked by file extension.
TriangleMesh load_mesh(const std::string& path);
void save_mesh(const std::string& path, const TriangleMesh& mesh);

TriangleMesh parse_obj(const std::string& text);
TriangleMesh parse_ply(const std::string& text);
std::string format_obj(const TriangleMesh& mesh);
std::string format_ply(const TriangleMesh& mesh);

}  // namespace ltree::geo
