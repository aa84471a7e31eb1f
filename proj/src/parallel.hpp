#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace archseg::detail {

// Runs fn(row) for every row in [0, rows). Rows are handed out dynamically;
// callers must only write per-row state so the result is schedule-independent.
template <typename Fn>
void parallel_rows(int rows, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(rows, 1)));
    if (threads <= 1) {
        for (int r = 0; r < rows; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                try {
                    for (int r = next.fetch_add(1); r < rows; r = next.fetch_add(1)) fn(r);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(rows);
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace archseg::detail
