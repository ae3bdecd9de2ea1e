#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace qsuggest {

/// Seeded generator with library-independent draws.
///
/// std::uniform_*_distribution output differs between standard libraries;
/// these helpers only rely on the raw mt19937_64 stream, which is fully
/// specified, so identical seeds give identical draws everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from unnormalized non-negative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (u < weights[k]) return k;
            u -= weights[k];
        }
        // rounding fallthrough: last positive weight
        for (std::size_t k = weights.size(); k-- > 0;) {
            if (weights[k] > 0.0) return k;
        }
        return 0;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t k = items.size(); k > 1; --k) {
            std::swap(items[k - 1], items[below(k)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// FNV-1a, used to derive per-key seeds.
inline std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
    std::uint64_t z = seed ^ stable_hash(key);
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace qsuggest
