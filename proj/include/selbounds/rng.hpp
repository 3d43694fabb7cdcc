#ifndef SELBOUNDS_RNG_HPP
#define SELBOUNDS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>

namespace selbounds {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based generator (SplitMix64). Streams are keyed by up to three
/// words so that every resample/replicate/restart gets its own substream and
/// results do not depend on execution order or thread count.
class RandomStream {
public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed, std::uint64_t key1 = 0,
                          std::uint64_t key2 = 0, std::uint64_t key3 = 0) {
        state_ = mix64(seed);
        state_ = mix64(state_ ^ mix64(key1 + 0x736F6D6570736575ULL));
        state_ = mix64(state_ ^ mix64(key2 + 0x646F72616E646F6DULL));
        state_ = mix64(state_ ^ mix64(key3 + 0x6C7967656E657261ULL));
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Unbiased uniform integer in [0, n); rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via the polar method (portable, pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double v1, v2, s;
        do {
            v1 = 2.0 * uniform01() - 1.0;
            v2 = 2.0 * uniform01() - 1.0;
            s = v1 * v1 + v2 * v2;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v2 * f;
        has_spare_ = true;
        return v1 * f;
    }

    /// Binomial(trials, p) by CDF inversion; intended for small trial counts.
    long binomial(long trials, double p) {
        const double q = 1.0 - p;
        double pmf = std::pow(q, static_cast<double>(trials));
        double cdf = pmf;
        const double u = uniform01();
        long k = 0;
        while (u > cdf && k < trials) {
            pmf *= (static_cast<double>(trials - k) / static_cast<double>(k + 1)) * (p / q);
            cdf += pmf;
            ++k;
        }
        return k;
    }

private:
    std::uint64_t state_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stream tags segregating the RNG domains used across the library.
namespace stream_tag {
inline constexpr std::uint64_t population = 1;
inline constexpr std::uint64_t replicate = 2;
inline constexpr std::uint64_t bootstrap = 3;
inline constexpr std::uint64_t multistart = 4;
inline constexpr std::uint64_t instance = 5;
} // namespace stream_tag

} // namespace selbounds

#endif
