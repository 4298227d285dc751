#ifndef CELLTRACK_PARALLEL_HPP
#define CELLTRACK_PARALLEL_HPP

#include <atomic>
#include <thread>
#include <vector>

namespace celltrack {

/// Thread budget for internal slab parallelism. 0 means hardware default.
/// The setting is thread-local so concurrently running pipelines can pick
/// their own budget without interfering. Results never depend on the budget:
/// work is chunked by z-slab and all reductions combine slab partials in
/// slab order.
void set_thread_budget(int n);
int thread_budget();

/// Runs fn(z) for z in [0, depth). fn must only write state owned by slab z
/// (plus per-slab reduction cells).
template <typename Fn>
void parallel_for_z(int depth, Fn&& fn) {
    int threads = thread_budget();
    if (threads > depth) threads = depth;
    if (threads <= 1 || depth <= 1) {
        for (int z = 0; z < depth; ++z) fn(z);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int z = next.fetch_add(1, std::memory_order_relaxed);
            if (z >= depth) return;
            fn(z);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

}  // namespace celltrack

#endif
