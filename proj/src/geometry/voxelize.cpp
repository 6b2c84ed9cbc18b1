#include "ltree/geometry/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ltree/core/threads.hpp"

namespace ltree::geo {

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) {
    tris_.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces) {
        Tri t{mesh.vertices[size_t(f[0])], mesh.vertices[size_t(f[1])],
              mesh.vertices[size_t(f[2])]};
        if (triangle_area(t.a, t.b, t.c) == 0.0) {
            ++degenerate_skipped_;
            continue;
        }
        tris_.push_back(t);
    }
    if (tris_.empty()) return;

    tri_boxes_.reserve(tris_.size());
    for (const auto& t : tris_) {
        Box3 b = Box3::empty_box();
        b.expand(t.a);
        b.expand(t.b);
        b.expand(t.c);
        tri_boxes_.push_back(b);
    }
    std::vector<int> order(tris_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    nodes_.reserve(tris_.size() * 2);
    root_ = build(order, 0, int(order.size()));

    // Reorder triangles so each leaf covers a contiguous range.
    std::vector<Tri> sorted;
    sorted.reserve(tris_.size());
    for (int i : order) sorted.push_back(tris_[size_t(i)]);
    tris_ = std::move(sorted);
    tri_boxes_.clear();
    tri_boxes_.shrink_to_fit();
}

int TriangleBvh::build(std::vector<int>& order, int begin, int end) {
    Node node;
    node.box = Box3::empty_box();
    for (int i = begin; i < end; ++i) {
        node.box.lo = Vec3::min(node.box.lo, tri_boxes_[size_t(order[size_t(i)])].lo);
        node.box.hi = Vec3::max(node.box.hi, tri_boxes_[size_t(order[size_t(i)])].hi);
    }
    constexpr int kLeafSize = 4;
    if (end - begin <= kLeafSize) {
        node.first = begin;
        node.count = end - begin;
        nodes_.push_back(node);
        return int(nodes_.size()) - 1;
    }
    Vec3 ext = node.box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](int a, int b) {
                         return tri_boxes_[size_t(a)].center()[axis] <
                                tri_boxes_[size_t(b)].center()[axis];
                     });
    int left = build(order, begin, mid);
    int right = build(order, mid, end);
    node.left = left;
    node.right = right;
    nodes_.push_back(node);
    return int(nodes_.size()) - 1;
}

double TriangleBvh::distance(const Vec3& p, double cap) const {
    if (tris_.empty()) return cap;
    double best = cap;
    // Explicit stack, nearer child first.
    int stack[64];
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        int ni = stack[--top];
        const Node& node = nodes_[size_t(ni)];
        if (node.box.dist2(p) >= best * best) continue;
        if (node.count > 0 || node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const Tri& t = tris_[size_t(i)];
                best = std::min(best, point_triangle_dist(p, t.a, t.b, t.c));
            }
            continue;
        }
        double dl = nodes_[size_t(node.left)].box.dist2(p);
        double dr = nodes_[size_t(node.right)].box.dist2(p);
        // Push the farther child first so the nearer one is processed next.
        if (dl <= dr) {
            if (dr < best * best) stack[top++] = node.right;
            if (dl < best * best) stack[top++] = node.left;
        } else {
            if (dl < best * best) stack[top++] = node.left;
            if (dr < best * best) stack[top++] = node.right;
        }
    }
    return best;
}

TUDFGrid voxelize_tudf(const TriangleMesh& mesh, double voxel_size, double truncation,
                       const Box3& bounds, VoxelizeStats* stats) {
    if (mesh.empty()) throw std::invalid_argument("voxelize: empty mesh");
    if (bounds.empty()) throw std::invalid_argument("voxelize: empty bounds");
    if (voxel_size <= 0.0) throw std::invalid_argument("voxelize: voxel_size must be > 0");
    if (truncation <= 0.0) throw std::invalid_argument("voxelize: truncation must be > 0");

    TriangleBvh bvh(mesh);
    if (stats) stats->degenerate_faces_skipped = bvh.degenerate_skipped();
    if (bvh.empty()) throw std::invalid_argument("voxelize: mesh has no non-degenerate faces");

    const Vec3 ext = bounds.extent();
    const int nx = std::max(1, int(std::ceil(ext.x / voxel_size - 1e-9)));
    const int ny = std::max(1, int(std::ceil(ext.y / voxel_size - 1e-9)));
    const int nz = std::max(1, int(std::ceil(ext.z / voxel_size - 1e-9)));

    TUDFGrid grid;
    grid.values = Grid3f(nx, ny, nz);
    grid.voxel_size = float(voxel_size);
    grid.origin = bounds.lo;
    grid.truncation = float(truncation);

    parallel_for(nz, [&](int64_t z0, int64_t z1) {
        for (int64_t z = z0; z < z1; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    Vec3 p = grid.voxel_center(x, y, int(z));
                    double d = bvh.distance(p, truncation);
                    grid.values.at(x, y, int(z)) = float(std::min(d, truncation));
                }
    });
    return grid;
}

}  // namespace ltree::geo
