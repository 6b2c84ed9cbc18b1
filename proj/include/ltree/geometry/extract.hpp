#pragma once

#include "ltree/core/grid.hpp"
#include "ltree/geometry/mesh.hpp"

namespace ltree::geo {

// Contours the level set {x : UDF(x) = iso_level} of an unsigned field with
// marching tetrahedra (six tets per cell, conforming split), producing the
// thin double shell around the surface. A grid uniformly >= iso_level yields
// an empty mesh. Requires 0 < iso_level < truncation.
TriangleMesh extract_mesh(const TUDFGrid& grid, double iso_level);

}  // namespace ltree::geo
