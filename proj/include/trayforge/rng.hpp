#pragma once

#include <cstdint>

namespace trayforge {

/// splitmix64 (Sebastiano Vigna, public domain). Chosen over std distributions
/// because the full output stream is pinned by the algorithm itself: the same
/// seed reproduces the same trial on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

    /// Uniform double in (-1, 1).
    double symmetric() { return 2.0 * next_double() - 1.0; }

    /// Uniform integer in [0, n). Modulo bias is irrelevant at simulation scale.
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    /// Derive an independent stream; `salt` separates uses of the same seed.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
        Rng r(seed ^ (salt * 0xD1B54A32D192ED03ull));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

} // namespace trayforge
