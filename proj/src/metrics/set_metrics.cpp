#include "ltree/metrics/set_metrics.hpp"

#include <json.hpp>

#include <limits>
#include <set>
#include <stdexcept>

#include "ltree/core/binio.hpp"
#include "ltree/core/threads.hpp"

namespace ltree::metrics {

using nlohmann::json;

namespace {

double pair_distance(const PointCloud& a, const PointCloud& b, PairMetric metric,
                     int emd_exact_threshold, bool* exact, double* epsilon) {
    if (metric == PairMetric::CD) return chamfer(a, b);
    EmdResult r = emd_detailed(a, b, emd_exact_threshold);
    if (exact && !r.exact) *exact = false;
    if (epsilon) *epsilon = std::max(*epsilon, r.epsilon);
    return r.value;
}

}  // namespace

SetMetrics set_metrics(const std::vector<PointCloud>& generated,
                       const std::vector<PointCloud>& reference, PairMetric metric,
                       int emd_exact_threshold, bool* emd_all_exact, double* emd_epsilon) {
    if (generated.empty() || reference.empty())
        throw std::invalid_argument("set_metrics: both sets must be nonempty");
    const int R = int(reference.size()), G = int(generated.size());
    const int n = R + G;
    auto cloud = [&](int i) -> const PointCloud& {
        return i < R ? reference[size_t(i)] : generated[size_t(i - R)];
    };

    // Full symmetric pairwise matrix over the union (reference first).
    std::vector<double> D(size_t(n) * size_t(n), 0.0);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});

    std::vector<uint8_t> exact_flags(pairs.size(), 1);
    std::vector<double> eps_flags(pairs.size(), 0.0);
    parallel_for(int64_t(pairs.size()), [&](int64_t lo, int64_t hi) {
        for (int64_t k = lo; k < hi; ++k) {
            const auto [i, j] = pairs[size_t(k)];
            bool exact = true;
            double eps = 0.0;
            const double d =
                pair_distance(cloud(i), cloud(j), metric, emd_exact_threshold, &exact, &eps);
            D[size_t(i) * n + size_t(j)] = d;
            D[size_t(j) * n + size_t(i)] = d;
            exact_flags[size_t(k)] = exact ? 1 : 0;
            eps_flags[size_t(k)] = eps;
        }
    });
    if (emd_all_exact)
        for (uint8_t e : exact_flags) *emd_all_exact = *emd_all_exact && (e != 0);
    if (emd_epsilon)
        for (double e : eps_flags) *emd_epsilon = std::max(*emd_epsilon, e);

    SetMetrics out;

    // MMD: mean over references of the nearest generated distance.
    double mmd = 0.0;
    for (int r = 0; r < R; ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (int g = 0; g < G; ++g) best = std::min(best, D[size_t(r) * n + size_t(R + g)]);
        mmd += best;
    }
    out.mmd = mmd / double(R);

    // COV: fraction of references claimed as someone's argmin (ties keep the
    // lowest reference index).
    std::set<int> covered;
    for (int g = 0; g < G; ++g) {
        int best_r = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < R; ++r) {
            const double d = D[size_t(R + g) * n + size_t(r)];
            if (d < best) {
                best = d;
                best_r = r;
            }
        }
        covered.insert(best_r);
    }
    out.cov = double(covered.size()) / double(R);

    // 1-NNA: leave-one-out nearest neighbor over the union, self excluded,
    // exact ties resolved toward the reference set (iterated first).
    int same = 0;
    for (int i = 0; i < n; ++i) {
        int best_j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = D[size_t(i) * n + size_t(j)];
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        const bool i_ref = i < R, j_ref = best_j < R;
        if (i_ref == j_ref) ++same;
    }
    out.nna = double(same) / double(n);
    return out;
}

MetricReport full_report(const std::vector<PointCloud>& generated,
                         const std::vector<PointCloud>& reference, int emd_exact_threshold) {
    MetricReport rep;
    rep.generated_count = int(generated.size());
    rep.reference_count = int(reference.size());
    rep.points_per_cloud = generated.empty() ? 0 : int(generated[0].points.size());

    auto cd = set_metrics(generated, reference, PairMetric::CD, emd_exact_threshold);
    rep.mmd_cd = cd.mmd;
    rep.cov_cd = cd.cov;
    rep.nna_cd = cd.nna;

    bool exact = true;
    double eps = 0.0;
    auto em = set_metrics(generated, reference, PairMetric::EMD, emd_exact_threshold, &exact, &eps);
    rep.mmd_emd = em.mmd;
    rep.cov_emd = em.cov;
    rep.nna_emd = em.nna;
    rep.emd_exact = exact;
    rep.emd_epsilon = eps;

    // Checksum over the six metric values for cacheability checks.
    io::ByteWriter w;
    for (double v : {rep.mmd_cd, rep.mmd_emd, rep.cov_cd, rep.cov_emd, rep.nna_cd, rep.nna_emd})
        w.f64(v);
    rep.distance_cache_checksum = io::sha256_hex(w.buf);
    return rep;
}

std::string MetricReport::to_json() const {
    json j;
    j["mmd_cd"] = mmd_cd;
    j["mmd_emd"] = mmd_emd;
    j["cov_cd"] = cov_cd;
    j["cov_emd"] = cov_emd;
    j["nna_cd"] = nna_cd;
    j["nna_emd"] = nna_emd;
    j["generated_count"] = generated_count;
    j["reference_count"] = reference_count;
    j["points_per_cloud"] = points_per_cloud;
    j["seed"] = seed;
    j["emd_exact"] = emd_exact;
    j["emd_epsilon"] = emd_epsilon;
    j["distance_cache_checksum"] = distance_cache_checksum;
    // CD reported as squared distances; FID reserved for external merge.
    j["cd_convention"] = "squared";
    if (fid >= 0) j["fid"] = fid;
    return j.dump(2);
}

}  // namespace ltree::metrics
