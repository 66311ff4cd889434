#ifndef PACKTRIAGE_RNG_HPP
#define PACKTRIAGE_RNG_HPP

#include <cstdint>
#include <cstddef>
#include <vector>

namespace packtriage {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed; used to give parallel work items
/// their own deterministic randomness so serial and parallel runs agree.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xA0761D6478BD642FULL + stream * 0xE7037ED1A0B428DBULL);
    return splitmix64(s);
}

/// xoshiro256** seeded via splitmix64. Self-contained so results are
/// identical across compilers and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, n), bias-free by rejection.
    std::uint64_t uniform_u64(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform_u64(n));
    }

    /// Uniform in [0, 1).
    double uniform_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform_double(double lo, double hi) {
        return lo + (hi - lo) * uniform_double();
    }

    std::uint8_t next_byte() { return static_cast<std::uint8_t>(next_u64() >> 56); }

    /// Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

} // namespace packtriage

#endif
