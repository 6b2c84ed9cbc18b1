#pragma once

#include <vector>

#include "ltree/core/grid.hpp"
#include "ltree/geometry/mesh.hpp"

namespace ltree::geo {

// Exact point-to-triangle nearest distance queries over a bounding volume
// hierarchy. Queries are clipped at a caller-supplied cap, which lets the
// voxelizer prune aggressively once the truncation value is reached.
class TriangleBvh {
public:
    explicit TriangleBvh(const TriangleMesh& mesh);

    // Unsigned distance from p to the nearest triangle, or `cap` if no
    // triangle is closer than that.
    double distance(const Vec3& p, double cap) const;

    int degenerate_skipped() const { return degenerate_skipped_; }
    bool empty() const { return tris_.empty(); }

private:
    struct Node {
        Box3 box;
        int left = -1, right = -1;   // children, or
        int first = 0, count = 0;    // leaf triangle range
    };
    struct Tri {
        Vec3 a, b, c;
    };

    int build(std::vector<int>& order, int begin, int end);

    std::vector<Tri> tris_;
    std::vector<Box3> tri_boxes_;
    std::vector<Node> nodes_;
    int root_ = -1;
    int degenerate_skipped_ = 0;
};

struct VoxelizeStats {
    int degenerate_faces_skipped = 0;
};

// TUDF of `mesh` over `bounds`: each voxel holds min(truncation, distance
// from the voxel center to the nearest surface point). Grid dimensions are
// ceil(extent / voxel_size) per axis.
TUDFGrid voxelize_tudf(const TriangleMesh& mesh, double voxel_size, double truncation,
                       const Box3& bounds, VoxelizeStats* stats = nullptr);

}  // namespace ltree::geo
