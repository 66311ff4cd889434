#include "packtriage/parallel.hpp"

#include <atomic>

namespace packtriage {

namespace {
std::atomic<int> g_max_threads{0}; // 0 = use OpenMP default
}

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    if (n > 0) return n;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_max_threads(int n) {
    g_max_threads.store(n < 0 ? 0 : n, std::memory_order_relaxed);
}

namespace detail {

int effective_threads(std::size_t n) {
    int t = max_threads();
    if (t < 1) t = 1;
    if (n < 2) return 1;
    if (static_cast<std::size_t>(t) > n) t = static_cast<int>(n);
    return t;
}

} // namespace detail
} // namespace packtriage
