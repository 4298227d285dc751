#include "celltrack/parallel.hpp"

namespace celltrack {

namespace {
thread_local int tl_budget = 0;
}

void set_thread_budget(int n) { tl_budget = n; }

int thread_budget() {
    if (tl_budget > 0) return tl_budget;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace celltrack
