#pragma once
// Deterministic worker pool helpers.  Work items write into preassigned
// slots and reductions happen in index order afterwards, so results never
// depend on the thread count.

#include <cstddef>
#include <thread>
#include <vector>
#include <atomic>
#include <functional>
#include <exception>
#include <algorithm>

namespace rbm {

inline unsigned default_threads() {
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

// process-wide worker count; 0 means "use default_threads()".
// affects speed only, results are identical for any setting
inline std::atomic<unsigned>& worker_thread_setting() {
    static std::atomic<unsigned> v{0};
    return v;
}

inline void set_worker_threads(unsigned k) { worker_thread_setting().store(k); }

inline unsigned worker_threads() {
    const unsigned k = worker_thread_setting().load();
    return k == 0 ? default_threads() : k;
}

// run fn(i) for i in [0, count); fn must only touch state owned by slot i
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (count == 0) return;
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    threads = std::min<std::size_t>(threads, count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load(std::memory_order_relaxed)) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) err = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// pairwise sum in fixed index order (independent of how slots were filled)
inline double ordered_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return ordered_sum(v, h) + ordered_sum(v + h, n - h);
}

inline double ordered_sum(const std::vector<double>& v) {
    return ordered_sum(v.data(), v.size());
}

} // namespace rbm
