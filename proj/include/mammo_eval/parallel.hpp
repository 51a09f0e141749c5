#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace mammo {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is handed out in
/// index order; results must be written to per-index slots by the caller, so
/// output never depends on scheduling. fn(i) returning false stops the
/// hand-out of further indices.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto run = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            if (!fn(i)) stop.store(true);
        }
    };
    if (workers <= 1) {
        run();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
}

}  // namespace mammo
