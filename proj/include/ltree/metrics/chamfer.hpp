#pragma once

#include "ltree/metrics/pointcloud.hpp"

namespace ltree::metrics {

// Static k-d tree over 3D points for exact nearest-neighbor queries. The
// returned squared distance equals the brute-force minimum bit for bit
// (same distance kernel, exact pruning).
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Vec3>& points);
    double nearest_sq(const Vec3& query) const;

private:
    struct Node {
        Vec3 point;
        int axis = 0;
        int left = -1, right = -1;
    };
    int build(std::vector<Vec3>& pts, int begin, int end, int depth);
    void search(int node, const Vec3& q, double& best) const;

    std::vector<Node> nodes_;
    int root_ = -1;
};

// Symmetric squared-distance Chamfer: mean over X of the squared nearest
// distance to Y, plus the mirrored term.
double chamfer(const PointCloud& X, const PointCloud& Y);

}  // namespace ltree::metrics
