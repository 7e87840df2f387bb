#pragma once

#include <cstdint>
#include <iterator>
#include <utility>

namespace mbti {

/// xoshiro256** seeded through splitmix64. Every derived quantity
/// (bounded integers, reals, normals, shuffles) is computed here rather
/// than through <random> distributions, whose output is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next();
    /// Uniform in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Box-Muller, no caching).
    double normal();

    template <class It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(std::distance(first, last));
        for (std::uint64_t i = n; i > 1; --i) {
            auto j = below(i);
            using std::swap;
            swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
        }
    }

private:
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for an independent stream keyed by (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

} // namespace mbti
