#pragma once

#include <cstdint>
#include <random>

namespace promobn {

// Derives an independent 64-bit seed for stream `index` of a master seed.
// SplitMix64 finalizer over (master, index); stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

// A seeded random source. Uniform and normal variates are produced by
// explicit transforms (not std:: distributions) so draws are identical
// across standard library implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform() noexcept;
    // Uniform on (0, 1).
    double uniform_open() noexcept;
    // Standard normal via the Box-Muller transform (one variate per call).
    double standard_normal() noexcept;
    // Uniform integer on [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    std::mt19937_64 engine_;
};

}  // namespace promobn
