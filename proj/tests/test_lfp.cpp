#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "selbounds/lfp.hpp"
#include "selbounds/rng.hpp"
#include "test_util.hpp"

using namespace selbounds;

TEST_CASE("degenerate-maximizer example solves to 7 exactly") {
    // beta(w) = (w1 + 7 w2 + 10 w3) / (w1 + w2 + w3), W = [1, 2]^3
    const SupportTable t = testutil::uniform_table({1, 7, 10}, {1, 1, 1});
    const WeightBox box(0.5, 1.0); // lo = 1, hi = 2
    const IntervalEstimate est = solve_bounds(t, box);
    CHECK(est.beta_hi == 7.0);
    CHECK(est.degenerate_cells_hi == std::vector<std::size_t>{1});
    CHECK(est.degenerate_cells_lo.empty());
    CHECK(est.beta_lo == doctest::Approx(4.75).epsilon(1e-14)); // w = (2,1,1) -> 19/4

    const IntervalEstimate bf = solve_bounds_bruteforce(t, box);
    CHECK(bf.beta_hi == 7.0);
    CHECK(bf.beta_lo == doctest::Approx(est.beta_lo).epsilon(1e-14));
    CHECK(bf.degenerate_cells_hi == std::vector<std::size_t>{1});
    // both (1,1,2) and (1,2,2) maximize; each solver returns one of them
    CHECK(evaluate(t, est.w_hi) == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(evaluate(t, bf.w_hi) == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("three-point derived example") {
    const SupportTable t = testutil::uniform_table({1, 2, 3}, {1, 1, 1});
    const WeightBox box(0.5, 1.0);
    const IntervalEstimate est = solve_bounds(t, box);
    // brute force over 2^3 vertices: min 7/4 at (2,1,1), max 9/4 at (1,1,2)
    CHECK(est.beta_lo == doctest::Approx(1.75).epsilon(1e-14));
    CHECK(est.beta_hi == doctest::Approx(2.25).epsilon(1e-14));
    CHECK(est.w_lo == std::vector<double>{2, 1, 1});
    CHECK(est.w_hi == std::vector<double>{1, 1, 2});
}

TEST_CASE("single-point box collapses to the unweighted estimate") {
    const SupportTable t = testutil::make_table({1, 4, -2}, {1, 1, 1}, {2, 1, 1});
    const WeightBox box(0.4, 0.4);
    const IntervalEstimate est = solve_bounds(t, box);
    const double unweighted = evaluate(t, std::vector<double>(3, 1.0));
    CHECK(est.beta_lo == doctest::Approx(unweighted).epsilon(1e-13));
    CHECK(est.beta_hi == doctest::Approx(unweighted).epsilon(1e-13));
}

TEST_CASE("single cell gives the ratio itself") {
    const SupportTable t = testutil::make_table({3.0}, {2.0}, {4});
    const WeightBox box(0.25, 0.5);
    const IntervalEstimate est = solve_bounds(t, box);
    CHECK(est.beta_lo == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(est.beta_hi == doctest::Approx(1.5).epsilon(1e-14));
    const IntervalEstimate bf = solve_bounds_bruteforce(t, box);
    CHECK(bf.beta_lo == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("brute force rejects large supports") {
    const std::size_t k = 21;
    const SupportTable t = testutil::uniform_table(std::vector<double>(k, 1.0),
                                                   std::vector<double>(k, 1.0));
    CHECK_THROWS_AS(solve_bounds_bruteforce(t, WeightBox(0.5, 1.0)), SupportTooLarge);
}

TEST_CASE("oracle equivalence on random instances") {
    RandomStream gen(21);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t k = 2 + gen.below(11);
        auto [t, box] = testutil::random_instance(gen, k);
        const IntervalEstimate fast = solve_bounds(t, box);
        const IntervalEstimate slow = solve_bounds_bruteforce(t, box);
        CHECK(std::fabs(fast.beta_lo - slow.beta_lo) < 1e-10);
        CHECK(std::fabs(fast.beta_hi - slow.beta_hi) < 1e-10);
    }
}

TEST_CASE("oracle equivalence with negative and zero g cells") {
    RandomStream gen(22);
    int negative_seen = 0;
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t k = 2 + gen.below(9);
        auto [t, box] = testutil::random_instance(gen, k, /*allow_negative_g=*/true);
        for (std::size_t i = 0; i < k; ++i) negative_seen += t.g[i] < 0.0;
        const IntervalEstimate fast = solve_bounds(t, box);
        const IntervalEstimate slow = solve_bounds_bruteforce(t, box);
        CHECK(std::fabs(fast.beta_lo - slow.beta_lo) < 1e-10);
        CHECK(std::fabs(fast.beta_hi - slow.beta_hi) < 1e-10);
    }
    CHECK(negative_seen > 50); // the flip path was really exercised

    // hand case covering +inf, -inf ratios and an inert cell
    const SupportTable t =
        testutil::uniform_table({1.0, -1.0, 0.0, 5.0}, {1.0, 0.0, 0.0, 1.0});
    const WeightBox box(0.5, 1.0);
    const IntervalEstimate fast = solve_bounds(t, box);
    const IntervalEstimate slow = solve_bounds_bruteforce(t, box);
    CHECK(fast.beta_lo == doctest::Approx(slow.beta_lo).epsilon(1e-13));
    CHECK(fast.beta_hi == doctest::Approx(slow.beta_hi).epsilon(1e-13));
    CHECK(fast.w_lo[2] == box.lo()); // inert cell pinned at lo
}

TEST_CASE("assumption failure: denominator can vanish over the box") {
    const SupportTable t = testutil::uniform_table({1.0, 2.0}, {1.0, -1.0});
    CHECK_THROWS_AS(solve_bounds(t, WeightBox(0.5, 1.0)), ZeroDenominator);
}

TEST_CASE("widening the box never shrinks the interval") {
    RandomStream gen(23);
    for (int iter = 0; iter < 50; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 2 + gen.below(9));
        const double a2 = box.a() * (0.3 + 0.7 * gen.uniform01());
        const WeightBox wider(a2, box.b());
        const IntervalEstimate narrow = solve_bounds(t, box);
        const IntervalEstimate wide = solve_bounds(t, wider);
        CHECK(wide.beta_lo <= narrow.beta_lo + 1e-12);
        CHECK(wide.beta_hi >= narrow.beta_hi - 1e-12);
    }
}

TEST_CASE("optimal weights have the single-switch threshold structure") {
    RandomStream gen(24);
    for (int iter = 0; iter < 50; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 3 + gen.below(8));
        const IntervalEstimate est = solve_bounds(t, box);
        std::vector<std::size_t> order(t.num_cells());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return t.f[i] / t.g[i] < t.f[j] / t.g[j];
        });
        int switches_hi = 0, switches_lo = 0;
        for (std::size_t j = 1; j < order.size(); ++j) {
            switches_hi += est.w_hi[order[j]] != est.w_hi[order[j - 1]];
            switches_lo += est.w_lo[order[j]] != est.w_lo[order[j - 1]];
        }
        CHECK(switches_hi <= 1);
        CHECK(switches_lo <= 1);
        // max: lo on small ratios switching to hi; min: the mirror image
        if (switches_hi == 1) CHECK(est.w_hi[order.front()] == box.lo());
        if (switches_lo == 1) CHECK(est.w_lo[order.front()] == box.hi());
    }
}

TEST_CASE("unweighted estimate lies inside the interval") {
    RandomStream gen(25);
    for (int iter = 0; iter < 50; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 2 + gen.below(9));
        const IntervalEstimate est = solve_bounds(t, box);
        const double unw = evaluate(t, std::vector<double>(t.num_cells(), 1.0));
        CHECK(unw >= est.beta_lo - 1e-12);
        CHECK(unw <= est.beta_hi + 1e-12);
    }
}

TEST_CASE("global optimality check") {
    const SupportTable t = testutil::uniform_table({1, 2, 3}, {1, 1, 1});
    const WeightBox box(0.5, 1.0);
    const IntervalEstimate est = solve_bounds(t, box);
    CHECK(check_global_optimality(t, box, est.w_hi, est.beta_hi, Direction::Max));
    CHECK(check_global_optimality(t, box, est.w_lo, est.beta_lo, Direction::Min));

    // all-lo is suboptimal for the max on this table
    const std::vector<double> all_lo(3, box.lo());
    const double beta_all_lo = evaluate(t, all_lo);
    CHECK_FALSE(check_global_optimality(t, box, all_lo, beta_all_lo, Direction::Max));

    CHECK_THROWS_AS(
        check_global_optimality(t, box, std::vector<double>{1.5, 1.0, 2.0}, 2.0, Direction::Max),
        NotAVertex);

    // K = 1: any vertex is optimal
    const SupportTable single = testutil::make_table({2.0}, {1.0}, {3});
    CHECK(check_global_optimality(single, box, std::vector<double>{box.lo()}, 2.0,
                                  Direction::Max));
    CHECK(check_global_optimality(single, box, std::vector<double>{box.hi()}, 2.0,
                                  Direction::Min));
}

TEST_CASE("solver weights always pass the optimality check") {
    RandomStream gen(26);
    for (int iter = 0; iter < 100; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 2 + gen.below(10), true);
        const IntervalEstimate est = solve_bounds(t, box);
        CHECK(check_global_optimality(t, box, est.w_hi, est.beta_hi, Direction::Max));
        CHECK(check_global_optimality(t, box, est.w_lo, est.beta_lo, Direction::Min));
    }
}
