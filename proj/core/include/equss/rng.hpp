#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace equss {

// splitmix64; platform-independent so every seeded run is reproducible bit-for-bit.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless mixing for counter-based (keyed) draws.
inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Uniform in (0, 1]: never returns 0 so log() is safe.
inline double u64_to_unit_open(std::uint64_t u) {
    return (static_cast<double>(u >> 11) + 1.0) * 0x1p-53;
}

// Uniform in [0, 1).
inline double u64_to_unit(std::uint64_t u) {
    return static_cast<double>(u >> 11) * 0x1p-53;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    double uniform() { return u64_to_unit(next_u64()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, no spare caching so the draw sequence is position-independent.
    double gaussian() {
        double u1 = u64_to_unit_open(next_u64());
        double u2 = u64_to_unit(next_u64());
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Unbiased-enough index draw for shuffles and sampling at desk scale.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    // Fisher-Yates; std::shuffle is implementation-defined, this is not.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Keyed gaussian: a pure function of (seed, a, b, c), so parallel generation
// cannot change the result.
inline double keyed_gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
    std::uint64_t k = mix_key(mix_key(mix_key(seed, a), b), c);
    std::uint64_t s = k;
    double u1 = u64_to_unit_open(splitmix64(s));
    double u2 = u64_to_unit(splitmix64(s));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace equss
