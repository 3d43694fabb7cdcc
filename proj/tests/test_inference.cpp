#include <doctest.h>

#include <cmath>

#include "selbounds/bootstrap.hpp"
#include "selbounds/inference.hpp"
#include "selbounds/normal.hpp"
#include "selbounds/rng.hpp"
#include "test_util.hpp"

using namespace selbounds;

TEST_CASE("sigma_hat hand-computed examples") {
    // two-point mean: sum phat (f - beta)^2 = 0.25, denominator 1
    const SupportTable t = testutil::uniform_table({0.0, 1.0}, {1.0, 1.0});
    CHECK(sigma_hat_sq(t, std::vector<double>{1.0, 1.0}, 0.5) ==
          doctest::Approx(0.25).epsilon(1e-14));

    // single cell: no dispersion
    const SupportTable single = testutil::make_table({3.0}, {1.0}, {5});
    CHECK(sigma_hat_sq(single, std::vector<double>{1.0}, 3.0) == doctest::Approx(0.0));

    // unit weights reduce to the population-style variance of f
    const SupportTable m = testutil::make_table({1.0, 2.0, 6.0}, {1.0, 1.0, 1.0}, {1, 2, 1});
    const std::vector<double> w(3, 1.0);
    const double beta = evaluate(m, w);
    double var = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        var += m.phat[i] * (m.f[i] - beta) * (m.f[i] - beta);
    CHECK(sigma_hat_sq(m, w, beta) == doctest::Approx(var).epsilon(1e-14));
}

TEST_CASE("confidence interval limits and degeneracy") {
    const SupportTable t = testutil::uniform_table({1, 2, 3}, {1, 1, 1});
    const WeightBox box(0.5, 1.0);
    const IntervalEstimate ie = solve_bounds(t, box);

    const AsymptoticCI tight = confidence_interval(ie, t, 0.9999);
    CHECK(tight.c_lo == doctest::Approx(ie.beta_lo).epsilon(1e-3));
    CHECK(tight.c_hi == doctest::Approx(ie.beta_hi).epsilon(1e-3));

    const AsymptoticCI ci = confidence_interval(ie, t, 0.05);
    CHECK(ci.c_lo <= ie.beta_lo);
    CHECK(ci.c_hi >= ie.beta_hi);
    CHECK(ci.se_lo > 0.0);
    CHECK_THROWS_AS(confidence_interval(ie, t, 0.0), InvalidParameter);
    CHECK_THROWS_AS(confidence_interval(ie, t, 1.0), InvalidParameter);

    // K = 1: zero variance, the CI is the point itself
    const SupportTable single = testutil::make_table({2.0}, {1.0}, {7});
    const IntervalEstimate one = solve_bounds(single, box);
    const AsymptoticCI point = confidence_interval(one, single, 0.05);
    CHECK(point.c_lo == doctest::Approx(2.0));
    CHECK(point.c_hi == doctest::Approx(2.0));
    CHECK(point.se_lo == 0.0);
}

TEST_CASE("confidence intervals nest across levels") {
    RandomStream gen(31);
    for (int iter = 0; iter < 20; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 3 + gen.below(8));
        const IntervalEstimate ie = solve_bounds(t, box);
        const double alpha = 0.02 + 0.5 * gen.uniform01();
        const double alpha_small = alpha * gen.uniform01();
        const AsymptoticCI wide = confidence_interval(ie, t, alpha_small);
        const AsymptoticCI narrow = confidence_interval(ie, t, alpha);
        CHECK(wide.c_lo <= narrow.c_lo + 1e-12);
        CHECK(wide.c_hi >= narrow.c_hi - 1e-12);
    }
}

TEST_CASE("p-value at the landmarks") {
    // wide interval, small standard errors
    CHECK(p_value_from_se(-1.0, 1.0, 0.01, 0.01, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p_value_from_se(-1.0, 1.0, 0.01, 0.01, 1.0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p_value_from_se(-1.0, 1.0, 0.01, 0.01, -1.0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p_value_from_se(-1.0, 1.0, 0.01, 0.01, 2.0) == doctest::Approx(0.0).epsilon(1e-9));

    // both standard errors zero: indicator of the interval
    CHECK(p_value_from_se(-1.0, 1.0, 0.0, 0.0, 0.5) == 1.0);
    CHECK(p_value_from_se(-1.0, 1.0, 0.0, 0.0, 1.0) == 1.0);
    CHECK(p_value_from_se(-1.0, 1.0, 0.0, 0.0, 1.5) == 0.0);
}

TEST_CASE("p-value is unimodal around the interval") {
    RandomStream gen(32);
    auto [t, box] = testutil::random_instance(gen, 8);
    const IntervalEstimate ie = solve_bounds(t, box);
    double prev = -1.0;
    bool decreasing = false;
    const double lo = ie.beta_lo - 3.0, hi = ie.beta_hi + 3.0;
    for (double bt = lo; bt <= hi; bt += (hi - lo) / 200.0) {
        const double p = p_value(ie, t, bt);
        if (decreasing) {
            CHECK(p <= prev + 1e-9);
        } else if (p < prev - 1e-9) {
            decreasing = true;
        }
        prev = p;
    }
    CHECK(decreasing); // it did come back down past the interval
}

TEST_CASE("test and confidence interval agree at matched levels") {
    // the p-value spends alpha one-sided past each endpoint, so the level-
    // alpha acceptance region matches the CI built at 2*alpha once the
    // interval is wide relative to the endpoint standard errors
    RandomStream gen(33);
    for (int iter = 0; iter < 10; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 6 + gen.below(5));
        for (auto& c : t.counts) c *= 20000; // large n: se << interval width
        t.n *= 20000;
        const IntervalEstimate ie = solve_bounds(t, box);
        const double alpha = 0.01 + 0.1 * gen.uniform01();
        const AsymptoticCI ci = confidence_interval(ie, t, 2.0 * alpha);
        for (double frac : {-0.3, -0.05, 0.05, 0.3, 0.9, 1.2}) {
            for (double side : {-1.0, 1.0}) {
                const double edge = side > 0 ? ci.c_hi : ci.c_lo;
                const double bt = edge + side * frac * 20.0 * (ci.se_lo + ci.se_hi);
                const double p = p_value(ie, t, bt);
                if (std::fabs(p - alpha) <= 1e-9) continue; // boundary tolerance
                CHECK((p >= alpha) == ci.contains(bt));
            }
        }
    }
}

TEST_CASE("delta-method variance tracks the resampling variance") {
    // fixed weights, n = 5000: compare sigma_hat^2 with n * Var(bootstrap)
    RandomStream gen(34);
    const std::size_t n = 5000;
    std::vector<double> values(n);
    for (double& v : values) v = gen.normal() + 0.3;
    ObservationSet obs(std::move(values), 1);
    const CollapseResult base = collapse_support_mapped(obs, Estimand::mean(0));

    std::vector<double> w(base.table.num_cells());
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = base.table.f[i] > 0.3 ? 4.0 : 1.0; // a fixed, spread-out weight profile
    const double beta = evaluate(base.table, w);
    const double analytic = sigma_hat_sq(base.table, w, beta);

    const std::size_t R = 2000;
    std::vector<double> draws(R);
    std::vector<double> counts(base.table.num_cells());
    for (std::size_t r = 0; r < R; ++r) {
        detail::bootstrap_resample_counts(base.cell_of_row, 99, r, 0, counts);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            num += w[i] * base.table.f[i] * counts[i];
            den += w[i] * base.table.g[i] * counts[i];
        }
        draws[r] = num / den;
    }
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= static_cast<double>(R);
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= static_cast<double>(R - 1);
    const double resampled = static_cast<double>(n) * var;
    CHECK(std::fabs(analytic - resampled) / resampled < 0.15);
}
