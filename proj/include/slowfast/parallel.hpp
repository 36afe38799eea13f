#pragma once

#include <cstddef>
#include <algorithm>
#include <thread>
#include <vector>

namespace slowfast {

// Chunked parallel loop. f(i) must write only to slot i-owned data;
// results are then independent of the schedule.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = std::min<std::size_t>(hw ? hw : 1, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &f] {
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace slowfast
