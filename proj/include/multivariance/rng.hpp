#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "multivariance/common.hpp"

namespace multivariance {

// Portable seeded generator: xoshiro256** (Blackman/Vigna), state initialized
// from the 64-bit seed via splitmix64. Pure integer arithmetic, so a seed
// reproduces the same stream on every platform. Parallel work derives
// independent streams as rng(base_seed + index).
class rng {
public:
    explicit rng(std::uint64_t seed = 0) {
        // splitmix64 expansion of the seed into the four state words
        std::uint64_t x = seed;
        for (auto& word : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1): 53 random mantissa bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; used where log(u) must stay finite.
    double uniform_pos() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Unbiased integer in [0, bound): masked rejection sampling.
    std::uint64_t uniform_below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        const std::uint64_t mask = mask_for(bound - 1);
        std::uint64_t v;
        do {
            v = next_u64() & mask;
        } while (v >= bound);
        return v;
    }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Standard Cauchy via inverse CDF.
    double cauchy() noexcept { return std::tan(std::numbers::pi * (uniform() - 0.5)); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }
    static std::uint64_t mask_for(std::uint64_t max_value) noexcept {
        std::uint64_t m = max_value;
        m |= m >> 1;
        m |= m >> 2;
        m |= m >> 4;
        m |= m >> 8;
        m |= m >> 16;
        m |= m >> 32;
        return m;
    }

    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Uniform random permutation of 0..n-1 by Fisher-Yates.
inline std::vector<std::uint32_t> random_permutation(rng& gen, std::size_t n) {
    std::vector<std::uint32_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen.uniform_below(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace multivariance
