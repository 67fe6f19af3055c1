#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace billiard {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(index) for index in [0, n). Work is handed out in fixed-size chunks
// from a shared counter; fn must write only to per-index slots so that the
// result is independent of scheduling. Reductions happen afterwards, in index
// order, on the caller's side.
template <typename Fn>
void parallel_for(std::uint64_t n, int workers, const Fn& fn) {
    workers = resolve_workers(workers);
    if (workers <= 1 || n < 2) {
        for (std::uint64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::uint64_t chunk = 1024;
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                std::uint64_t begin = next.fetch_add(chunk);
                if (begin >= n) break;
                std::uint64_t end = std::min(n, begin + chunk);
                try {
                    for (std::uint64_t i = begin; i < end; ++i) fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace billiard
