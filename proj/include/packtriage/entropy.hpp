#ifndef PACKTRIAGE_ENTROPY_HPP
#define PACKTRIAGE_ENTROPY_HPP

#include <array>
#include <cstdint>
#include <span>

namespace packtriage {

/// Byte-value histogram of `data`. Parallel over blocks for large inputs;
/// per-block counts are merged in block order, so the result is identical
/// to a single-threaded count.
std::array<std::uint64_t, 256> byte_histogram(std::span<const std::uint8_t> data);

/// Shannon entropy in bits per byte, in [0, 8]. Empty input yields 0.
double shannon_entropy(std::span<const std::uint8_t> data);

/// Single-loop reference implementation; kept for tests and the benchmark.
double shannon_entropy_serial(std::span<const std::uint8_t> data);

} // namespace packtriage

#endif
