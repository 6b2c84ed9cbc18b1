#pragma once

#include "ltree/metrics/pointcloud.hpp"

namespace ltree::metrics {

struct EmdResult {
    double value = 0.0;    // mean matched Euclidean distance
    bool exact = true;
    double epsilon = 0.0;  // auction tolerance when approximate
};

// Minimum-cost perfect matching (optimal assignment) mean distance between
// equal-size point clouds. Exact (Hungarian with potentials) up to
// exact_threshold points; epsilon-scaling auction beyond, with the final
// epsilon reported.
EmdResult emd_detailed(const PointCloud& X, const PointCloud& Y, int exact_threshold = 256);

double emd(const PointCloud& X, const PointCloud& Y, int exact_threshold = 256);

// Exact assignment on an explicit row-major cost matrix; returns the optimal
// total cost and fills match[col] = row. Exposed for the metric oracles.
double solve_assignment_exact(const std::vector<double>& cost, int n, std::vector<int>* match = nullptr);

}  // namespace ltree::metrics
