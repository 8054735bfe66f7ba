#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <string_view>

namespace spikegram {

/// Deterministic 64-bit generator (splitmix64). All stochastic behavior in
/// the library flows through instances of this type; nothing reads OS
/// entropy or the clock, so a run is a pure function of its seeds.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        assert(bound > 0);
        // Rejection on the top of the range keeps the draw unbiased.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % bound;
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        assert(lo <= hi);
        return lo + static_cast<std::int64_t>(
                        next_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }

    /// Index drawn with probability weights[i] / sum(weights).
    std::size_t weighted_choice(std::span<const double> weights) {
        assert(!weights.empty());
        double total = 0.0;
        for (double w : weights) total += w;
        assert(total > 0.0);
        double x = next_unit() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (x < acc) return i;
        }
        return weights.size() - 1;
    }

  private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Named sub-stream derivation: child = hash(master, component, index).
/// Parallel and serial evaluation orders see identical streams because every
/// consumer derives its own seed instead of sharing a generator.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                                 std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(component);
    h = mix64(h ^ (master + 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (index + 0x632be59bd9b4e019ULL));
    return h;
}

} // namespace spikegram
