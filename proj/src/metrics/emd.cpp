#include "ltree/metrics/emd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ltree::metrics {

// Hungarian algorithm with potentials, O(n^3).
double solve_assignment_exact(const std::vector<double>& cost, int n, std::vector<int>* match) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(size_t(n) + 1, 0.0), v(size_t(n) + 1, 0.0);
    std::vector<int> p(size_t(n) + 1, 0), way(size_t(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(size_t(n) + 1, inf);
        std::vector<char> used(size_t(n) + 1, 0);
        do {
            used[size_t(j0)] = 1;
            const int i0 = p[size_t(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[size_t(j)]) continue;
                const double cur =
                    cost[size_t(i0 - 1) * n + size_t(j - 1)] - u[size_t(i0)] - v[size_t(j)];
                if (cur < minv[size_t(j)]) {
                    minv[size_t(j)] = cur;
                    way[size_t(j)] = j0;
                }
                if (minv[size_t(j)] < delta) {
                    delta = minv[size_t(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[size_t(j)]) {
                    u[size_t(p[size_t(j)])] += delta;
                    v[size_t(j)] -= delta;
                } else {
                    minv[size_t(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[size_t(j0)] != 0);
        do {
            const int j1 = way[size_t(j0)];
            p[size_t(j0)] = p[size_t(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    if (match) match->assign(size_t(n), -1);
    for (int j = 1; j <= n; ++j) {
        total += cost[size_t(p[size_t(j)] - 1) * n + size_t(j - 1)];
        if (match) (*match)[size_t(j - 1)] = p[size_t(j)] - 1;
    }
    return total;
}

namespace {

// Forward auction with epsilon scaling (maximization over -cost). The final
// assignment is within n*eps of optimal.
double auction_assignment(const std::vector<Vec3>& X, const std::vector<Vec3>& Y,
                          double* final_eps) {
    const int n = int(X.size());
    auto cost = [&](int i, int j) { return std::sqrt(sq_dist(X[size_t(i)], Y[size_t(j)])); };

    double cmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cmax = std::max(cmax, cost(i, j));

    std::vector<double> price(size_t(n), 0.0);
    std::vector<int> owner(size_t(n), -1), assigned(size_t(n), -1);
    const double eps_min = std::max(1e-9, cmax * 1e-4 / double(n));
    double eps = std::max(eps_min, cmax / 2.0);

    while (true) {
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::vector<int> free_list(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) free_list[size_t(i)] = i;
        while (!free_list.empty()) {
            const int i = free_list.back();
            free_list.pop_back();
            // Best and second-best value of object j for person i.
            int best_j = -1;
            double best_v = -std::numeric_limits<double>::infinity(), second_v = best_v;
            for (int j = 0; j < n; ++j) {
                const double v = -cost(i, j) - price[size_t(j)];
                if (v > best_v) {
                    second_v = best_v;
                    best_v = v;
                    best_j = j;
                } else if (v > second_v) {
                    second_v = v;
                }
            }
            const double bid = (best_v - second_v) + eps;
            price[size_t(best_j)] += bid;
            const int prev = owner[size_t(best_j)];
            if (prev >= 0) {
                assigned[size_t(prev)] = -1;
                free_list.push_back(prev);
            }
            owner[size_t(best_j)] = i;
            assigned[size_t(i)] = best_j;
        }
        if (eps <= eps_min) break;
        eps = std::max(eps_min, eps / 5.0);
    }
    if (final_eps) *final_eps = eps;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, assigned[size_t(i)]);
    return total;
}

}  // namespace

EmdResult emd_detailed(const PointCloud& X, const PointCloud& Y, int exact_threshold) {
    X.validate();
    Y.validate();
    if (X.points.size() != Y.points.size())
        throw std::invalid_argument("emd: point clouds must have equal size");
    const int n = int(X.points.size());
    EmdResult result;
    if (n <= exact_threshold) {
        std::vector<double> cost(size_t(n) * size_t(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                cost[size_t(i) * n + size_t(j)] =
                    std::sqrt(sq_dist(X.points[size_t(i)], Y.points[size_t(j)]));
        result.value = solve_assignment_exact(cost, n) / double(n);
        result.exact = true;
    } else {
        double eps = 0.0;
        result.value = auction_assignment(X.points, Y.points, &eps) / double(n);
        result.exact = false;
        result.epsilon = eps;
    }
    return result;
}

double emd(const PointCloud& X, const PointCloud& Y, int exact_threshold) {
    return emd_detailed(X, Y, exact_threshold).value;
}

}  // namespace ltree::metrics
