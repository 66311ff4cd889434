#include "packtriage/entropy.hpp"

#include "packtriage/parallel.hpp"

#include <cmath>
#include <vector>

namespace packtriage {

namespace {

// Below this size the histogram is counted inline; splitting the work
// costs more than the count itself.
constexpr std::size_t kParallelThreshold = 1u << 20;

double entropy_from_counts(const std::array<std::uint64_t, 256>& counts,
                           std::uint64_t total) {
    if (total == 0) return 0.0;
    const double n = static_cast<double>(total);
    double h = 0.0;
    for (std::uint64_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

} // namespace

std::array<std::uint64_t, 256> byte_histogram(std::span<const std::uint8_t> data) {
    std::array<std::uint64_t, 256> counts{};
    if (data.size() < kParallelThreshold || max_threads() <= 1) {
        for (std::uint8_t b : data) ++counts[b];
        return counts;
    }

    const std::size_t block = kParallelThreshold / 4;
    const std::size_t n_blocks = (data.size() + block - 1) / block;
    std::vector<std::array<std::uint64_t, 256>> partial(n_blocks);
    parallel_for(n_blocks, [&](std::size_t i) {
        auto& local = partial[i];
        local.fill(0);
        const std::size_t begin = i * block;
        const std::size_t end = std::min(begin + block, data.size());
        for (std::size_t k = begin; k < end; ++k) ++local[data[k]];
    });
    for (const auto& local : partial)
        for (int b = 0; b < 256; ++b) counts[b] += local[b];
    return counts;
}

double shannon_entropy(std::span<const std::uint8_t> data) {
    return entropy_from_counts(byte_histogram(data), data.size());
}

double shannon_entropy_serial(std::span<const std::uint8_t> data) {
    std::array<std::uint64_t, 256> counts{};
    for (std::uint8_t b : data) ++counts[b];
    return entropy_from_counts(counts, data.size());
}

} // namespace packtriage
