#include "ltree/metrics/chamfer.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ltree::metrics {

KdTree3::KdTree3(const std::vector<Vec3>& points) {
    if (points.empty()) throw std::invalid_argument("KdTree3: empty point set");
    std::vector<Vec3> pts = points;
    nodes_.reserve(pts.size());
    root_ = build(pts, 0, int(pts.size()), 0);
}

int KdTree3::build(std::vector<Vec3>& pts, int begin, int end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const int mid = (begin + end) / 2;
    std::nth_element(pts.begin() + begin, pts.begin() + mid, pts.begin() + end,
                     [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
    Node node;
    node.point = pts[size_t(mid)];
    node.axis = axis;
    const int self = int(nodes_.size());
    nodes_.push_back(node);
    nodes_[size_t(self)].left = build(pts, begin, mid, depth + 1);
    nodes_[size_t(self)].right = build(pts, mid + 1, end, depth + 1);
    return self;
}

void KdTree3::search(int ni, const Vec3& q, double& best) const {
    if (ni < 0) return;
    const Node& node = nodes_[size_t(ni)];
    best = std::min(best, sq_dist(q, node.point));
    const double delta = q[node.axis] - node.point[node.axis];
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, q, best);
    if (delta * delta < best) search(far, q, best);
}

double KdTree3::nearest_sq(const Vec3& query) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, query, best);
    return best;
}

double chamfer(const PointCloud& X, const PointCloud& Y) {
    X.validate();
    Y.validate();
    const KdTree3 ty(Y.points);
    double sum_xy = 0.0;
    for (const auto& p : X.points) sum_xy += ty.nearest_sq(p);
    const KdTree3 tx(X.points);
    double sum_yx = 0.0;
    for (const auto& p : Y.points) sum_yx += tx.nearest_sq(p);
    return sum_xy / double(X.points.size()) + sum_yx / double(Y.points.size());
}

}  // namespace ltree::metrics
