#ifndef SELBOUNDS_TEST_UTIL_HPP
#define SELBOUNDS_TEST_UTIL_HPP

#include <numeric>
#include <vector>

#include "selbounds/lfp.hpp"
#include "selbounds/rng.hpp"
#include "selbounds/support.hpp"

namespace testutil {

/// One-column table with explicit f, g and integer counts; cell values are
/// the f values so covariate-style tests can reuse column 0.
inline selbounds::SupportTable make_table(std::vector<double> f, std::vector<double> g,
                                          std::vector<std::int64_t> counts) {
    selbounds::SupportTable t;
    t.dim = 1;
    t.values = f;
    t.f = std::move(f);
    t.g = std::move(g);
    t.counts = std::move(counts);
    const std::int64_t n = std::accumulate(t.counts.begin(), t.counts.end(), std::int64_t{0});
    t.n = static_cast<std::size_t>(n);
    t.phat.resize(t.counts.size());
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        t.phat[i] = static_cast<double>(t.counts[i]) / static_cast<double>(n);
    return t;
}

inline selbounds::SupportTable uniform_table(std::vector<double> f, std::vector<double> g) {
    const std::size_t k = f.size();
    return make_table(std::move(f), std::move(g), std::vector<std::int64_t>(k, 1));
}

struct RandomInstance {
    selbounds::SupportTable table;
    selbounds::WeightBox box;
};

/// Random instance with g bounded away from 0 (positive), random masses and
/// a random nondegenerate box.
inline RandomInstance random_instance(selbounds::RandomStream& gen, std::size_t k,
                                      bool allow_negative_g = false) {
    while (true) {
        std::vector<double> f(k), g(k);
        std::vector<std::int64_t> counts(k);
        for (std::size_t i = 0; i < k; ++i) {
            f[i] = -3.0 + 6.0 * gen.uniform01();
            g[i] = allow_negative_g ? (gen.uniform01() < 0.25 ? -0.4 + 0.3 * gen.uniform01()
                                                              : 0.5 + 1.5 * gen.uniform01())
                                    : 0.5 + 1.5 * gen.uniform01();
            counts[i] = 1 + static_cast<std::int64_t>(gen.below(5));
        }
        const double a = 0.1 + 0.6 * gen.uniform01();
        const double b = a + (1.0 - a) * gen.uniform01();
        selbounds::WeightBox box(a, std::min(b, 1.0));
        selbounds::SupportTable t = make_table(std::move(f), std::move(g), std::move(counts));
        // keep only instances whose denominator is positive over the box
        double den_min = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            den_min += t.phat[i] * t.g[i] * (t.g[i] > 0.0 ? box.lo() : box.hi());
        if (den_min > 0.05) return {std::move(t), box};
    }
}

} // namespace testutil

#endif
