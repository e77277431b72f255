#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace qdarwin {

/// Seed derivation and portable variate generation.
///
/// Every stochastic routine takes a 64-bit seed and derives per-task streams
/// by counter splitting, so results do not depend on how work is scheduled.
/// Variates are produced from raw engine output with our own transforms,
/// which keeps them identical across standard-library implementations.

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for (stream, counter) under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t counter = 0) noexcept {
    return mix64(mix64(master ^ mix64(stream)) + counter);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1].
    double uniform_open_closed() { return 1.0 - uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal variate (Box-Muller, no caching).
    double normal();

    /// Uniformly random m-subset of {0, ..., n-1}, sorted ascending.
    std::vector<std::size_t> subset(std::size_t n, std::size_t m);

private:
    std::mt19937_64 engine_;
};

}  // namespace qdarwin
