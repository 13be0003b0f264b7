#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>
#include <algorithm>

namespace srnflab {

/* Worker cap: min(hardware, SRNF_LAB_THREADS if set). */
inline int thread_budget() {
    int hw = int(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("SRNF_LAB_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

/* Chunked parallel loop over [0,n). Each index is visited exactly once and
   bodies must write only to disjoint slots; reductions belong to the caller
   so results stay deterministic regardless of the thread count. */
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    int workers = thread_budget();
    if (workers <= 1 || n < 256) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace srnflab
