#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace mdopt {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> n{0};
    return n;
}
}  // namespace detail

// 0 means "use hardware concurrency".
inline void set_max_threads(unsigned n) { detail::thread_setting().store(n); }

inline unsigned max_threads() {
    unsigned n = detail::thread_setting().load();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Calls fn(i) for i in [0, n). Work is split into fixed-size blocks so the
// per-index results never depend on the thread count; reductions are done
// afterwards, serially, by the caller.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    constexpr std::size_t block = 2048;
    const std::size_t blocks = (n + block - 1) / block;
    const unsigned threads =
        static_cast<unsigned>(std::min<std::size_t>(max_threads(), blocks));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= blocks) return;
            try {
                const std::size_t end = std::min(n, (b + 1) * block);
                for (std::size_t i = b * block; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(blocks);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

// Pairwise (tree) summation in index order. Bitwise reproducible.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace mdopt
