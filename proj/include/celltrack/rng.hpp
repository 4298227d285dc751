#ifndef CELLTRACK_RNG_HPP
#define CELLTRACK_RNG_HPP

#include <cmath>
#include <cstdint>

namespace celltrack {

/// Deterministic 64-bit counter-based generator. Each draw hashes
/// (key, counter) with a splitmix-style mixer, so streams derived from the
/// same seed are independent and the sequence is reproducible regardless of
/// platform or call interleaving across streams.
class CounterRng {
public:
    CounterRng() = default;
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ull))) {}

    std::uint64_t next_u64() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ull); }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller; consumes exactly two draws.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

    std::uint64_t key_ = 0x9e3779b97f4a7c15ull;
    std::uint64_t counter_ = 0;
};

}  // namespace celltrack

#endif
