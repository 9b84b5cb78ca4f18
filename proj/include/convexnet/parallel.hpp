#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace convexnet {

inline unsigned worker_count() {
    if (const char* env = std::getenv("CONVEXNET_THREADS")) {
        const long n = std::atol(env);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(begin, end, worker) over a fixed contiguous partition of
/// [0, count). The partition depends only on the worker count, so any
/// reduction that combines per-worker results in worker order is
/// deterministic.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned workers = worker_count()) {
    if (count == 0) return;
    if (workers <= 1 || count < 2 * workers) {
        fn(std::size_t{0}, count, 0u);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        if (lo >= count) break;
        const std::size_t hi = lo + chunk < count ? lo + chunk : count;
        pool.emplace_back([&fn, &error, &error_mutex, lo, hi, w] {
            try {
                fn(lo, hi, w);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace convexnet
