#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace ltree {

inline int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

// Blocked parallel loop over [0, n). Each worker gets one contiguous range,
// so writes to index-disjoint outputs are race-free and results do not depend
// on scheduling. The network forward/backward kernels are single-threaded by
// design; parallelism lives at the patch / voxel-block level (see module
// concurrency notes).
inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body,
                         int max_threads = 0) {
    if (n <= 0) return;
    int nthreads = max_threads > 0 ? max_threads : hardware_threads();
    nthreads = int(std::min<int64_t>(nthreads, n));
    if (nthreads <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(nthreads);
    int64_t chunk = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
        int64_t begin = t * chunk;
        int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace ltree
