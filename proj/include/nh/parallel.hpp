#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nh {

/// Thread count from an explicit request, else the NH_THREADS environment variable, else 1.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NH_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

/// Run f(i) for i in [0, n). Work is split in contiguous blocks; callers write
/// results by index so output order never depends on scheduling. The first
/// exception thrown by any worker is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr error;
    std::mutex m;
    std::vector<std::thread> pool;
    const std::size_t block = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::size_t lo = t * block, hi = std::min(n, lo + block);
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace nh
