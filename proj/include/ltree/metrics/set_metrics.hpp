#pragma once

#include <string>

#include "ltree/metrics/chamfer.hpp"
#include "ltree/metrics/emd.hpp"

namespace ltree::metrics {

enum class PairMetric { CD, EMD };

struct SetMetrics {
    double mmd = 0.0;
    double cov = 0.0;
    double nna = 0.0;
};

struct MetricReport {
    double mmd_cd = 0, mmd_emd = 0;
    double cov_cd = 0, cov_emd = 0;
    double nna_cd = 0, nna_emd = 0;
    int generated_count = 0, reference_count = 0;
    int points_per_cloud = 0;
    uint64_t seed = 0;
    bool emd_exact = true;
    double emd_epsilon = 0.0;
    std::string distance_cache_checksum;
    double fid = -1.0;  // reserved; filled by external tooling when available

    std::string to_json() const;
};

// MMD (mean over references of the nearest generated distance), COV
// (fraction of references that are some generated sample's argmin), and
// 1-NNA (leave-one-out nearest-neighbor classification accuracy over the
// union). N_X excludes X itself; exact distance ties break toward the
// reference set.
SetMetrics set_metrics(const std::vector<PointCloud>& generated,
                       const std::vector<PointCloud>& reference, PairMetric metric,
                       int emd_exact_threshold = 256, bool* emd_all_exact = nullptr,
                       double* emd_epsilon = nullptr);

MetricReport full_report(const std::vector<PointCloud>& generated,
                         const std::vector<PointCloud>& reference, int emd_exact_threshold = 256);

}  // namespace ltree::metrics
