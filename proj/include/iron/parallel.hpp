#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace iron {

// Runs fn(index) for every index in [0, n). Work is split into contiguous
// ranges, one per worker. Each index is processed by exactly one thread and
// writes only its own outputs, so results are independent of the thread
// count. The first exception thrown by any worker is rethrown to the caller.
template <typename Fn>
void parallel_for(std::int64_t n, int n_threads, Fn&& fn) {
    if (n <= 0) return;
    n_threads = std::max(1, n_threads);
    if (n_threads == 1 || n < 2) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(n_threads, n));
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace iron
