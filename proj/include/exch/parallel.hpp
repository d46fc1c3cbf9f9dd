#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace exch {

/// Resolves a requested worker count; 0 means one per hardware thread.
inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Evaluates fn(i) for i in [0, count) and returns the results in index order.
///
/// Work items are claimed dynamically, but each result lands in its own slot,
/// so any order-sensitive reduction done afterwards is independent of the
/// worker count.
template <typename Fn>
auto parallel_map(std::size_t count, unsigned threads, Fn&& fn) {
    using Result = decltype(fn(std::size_t{0}));
    std::vector<Result> out(count);
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Pairwise-tree reduction in index order: ((0+1)+(2+3))+... .
template <typename T, typename Combine>
T tree_reduce(std::vector<T> items, Combine&& combine) {
    if (items.empty()) return T{};
    while (items.size() > 1) {
        std::vector<T> next;
        next.reserve((items.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < items.size(); i += 2) {
            next.push_back(combine(items[i], items[i + 1]));
        }
        if (items.size() % 2 == 1) next.push_back(std::move(items.back()));
        items = std::move(next);
    }
    return std::move(items.front());
}

}  // namespace exch
