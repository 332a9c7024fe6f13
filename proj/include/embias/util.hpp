#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace embias::util {

// Worker cap: EMBIAS_THREADS when set, otherwise hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("EMBIAS_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

// Static block partition of [0, n); fn(i) must only write state owned by
// index i so results are independent of the worker layout.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    const unsigned workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t used = std::min<std::size_t>(workers, n);
    std::vector<std::thread> pool;
    pool.reserve(used);
    std::vector<std::exception_ptr> errors(used);
    const std::size_t chunk = (n + used - 1) / used;
    for (std::size_t w = 0; w < used; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace embias::util
