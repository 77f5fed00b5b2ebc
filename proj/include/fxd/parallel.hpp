#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace fxd {

/// Process-wide worker cap (CLI --threads / FXD_THREADS). Defaults to the
/// hardware concurrency.
int worker_count();
void set_worker_count(int n);

/// Splits [0, n) into one contiguous block per worker and runs
/// fn(block_index, begin, end) on each. The static partition keeps runs
/// reproducible for a fixed worker count; reductions over per-block
/// buffers in block order are deterministic.
template <typename Fn>
void parallel_blocks(int n, Fn&& fn) {
    int workers = std::min(worker_count(), std::max(n, 1));
    if (workers <= 1 || n <= 1) {
        if (n > 0) fn(0, 0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    int chunk = (n + workers - 1) / workers;
    for (int b = 0; b < workers; ++b) {
        int begin = b * chunk;
        int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&fn, b, begin, end] { fn(b, begin, end); });
    }
    for (std::thread& t : threads) t.join();
}

} // namespace fxd
