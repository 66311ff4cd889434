#ifndef PACKTRIAGE_PARALLEL_HPP
#define PACKTRIAGE_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace packtriage {

/// Thread cap for all parallel kernels. 1 disables OpenMP entirely and is
/// the serial reference mode; every kernel is written so that serial and
/// parallel runs produce bit-identical results.
int max_threads();
void set_max_threads(int n);

namespace detail {
int effective_threads(std::size_t n);
}

/// Runs body(i) for i in [0, n). Iterations must be independent and write
/// to disjoint slots; merge order is always index order.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    const int threads = detail::effective_threads(n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
#ifdef _OPENMP
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
#else
    for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

} // namespace packtriage

#endif
