#pragma once
// Static-partition parallel for.  Work items must be independent; each index
// is processed exactly once.  n_threads <= 1 degrades to a plain loop, which
// is the only mode with a bitwise-determinism guarantee.

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace wtal {

template <typename Fn>
inline void parallel_for(int n, int n_threads, Fn&& fn) {
    if (n <= 0) return;
    const int workers = std::min(std::max(n_threads, 1), n);
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                // contiguous blocks keep per-thread work deterministic
                const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
                const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace wtal
