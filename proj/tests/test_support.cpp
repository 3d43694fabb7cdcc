#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "selbounds/estimand.hpp"
#include "selbounds/rng.hpp"
#include "selbounds/support.hpp"
#include "test_util.hpp"

using namespace selbounds;

namespace {
std::string g_last_warning;
void capture_warning(const std::string& msg) { g_last_warning = msg; }
} // namespace

TEST_CASE("collapse counts duplicate rows") {
    ObservationSet obs({1.0, 2.0, 2.0, 3.0}, 1, {"y"});
    const SupportTable t = collapse_support(obs, Estimand::mean(0));
    REQUIRE(t.num_cells() == 3);
    CHECK(t.phat[0] == doctest::Approx(0.25));
    CHECK(t.phat[1] == doctest::Approx(0.5));
    CHECK(t.phat[2] == doctest::Approx(0.25));
    CHECK(t.f == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(t.g == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(t.counts == std::vector<std::int64_t>{1, 2, 1});
    t.validate();
}

TEST_CASE("identical rows collapse to a single cell") {
    ObservationSet obs({5.0, 5.0, 5.0}, 1);
    const SupportTable t = collapse_support(obs, Estimand::mean(0));
    REQUIRE(t.num_cells() == 1);
    CHECK(t.phat[0] == 1.0);
}

TEST_CASE("continuous draws get one cell per row") {
    // oracle: exact dictionary of row keys
    RandomStream gen(123);
    std::vector<double> values(1000);
    for (double& v : values) v = gen.normal();
    std::map<double, int> oracle;
    for (double v : values) ++oracle[v];
    warnings::Handler old = warnings::set_handler(&capture_warning);
    ObservationSet obs(std::move(values), 1);
    const SupportTable t = collapse_support(obs, Estimand::mean(0));
    warnings::set_handler(old);
    CHECK(t.num_cells() == oracle.size());
    CHECK(t.num_cells() == 1000);
    for (std::size_t k = 0; k < t.num_cells(); ++k)
        CHECK(t.phat[k] == doctest::Approx(0.001));
    CHECK(g_last_warning.find("nearly continuous") != std::string::npos);
}

TEST_CASE("signed zeros share a cell") {
    ObservationSet obs({0.0, -0.0, 1.0}, 1);
    const SupportTable t = collapse_support(obs, Estimand::mean(0));
    CHECK(t.num_cells() == 2);
    CHECK(t.counts[0] == 2);
}

TEST_CASE("non-finite estimand evaluation is a hard error") {
    ObservationSet obs({1.0, 0.0}, 1);
    const Estimand bad = Estimand::custom(
        [](std::span<const double> row) { return 1.0 / row[0]; },
        [](std::span<const double>) { return 1.0; });
    CHECK_THROWS_AS(collapse_support(obs, bad), NonFiniteEvaluation);
    try {
        collapse_support(obs, bad);
    } catch (const NonFiniteEvaluation& e) {
        CHECK(e.row == 1);
    }
    ObservationSet nan_obs({1.0, std::nan("")}, 1);
    CHECK_THROWS_AS(collapse_support(nan_obs, Estimand::mean(0)), NonFiniteEvaluation);
}

TEST_CASE("observation set validation") {
    CHECK_THROWS_AS(ObservationSet({1.0}, 1), EmptyInput);
    CHECK_THROWS_AS(ObservationSet({1.0, 2.0, 3.0}, 2), InvalidParameter);
    ObservationSet obs({1.0, 2.0}, 1, {"y"});
    CHECK(obs.column_index("y") == 0);
    CHECK_THROWS_AS(obs.column_index("x"), DataError);
}

TEST_CASE("weight box validation") {
    WeightBox box(0.1, 1.0);
    CHECK(box.lo() == 1.0);
    CHECK(box.hi() == 10.0);
    CHECK_THROWS_AS(WeightBox(0.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(WeightBox(0.5, 0.4), InvalidParameter);
    CHECK_THROWS_AS(WeightBox(0.5, 1.2), InvalidParameter);
    CHECK(WeightBox(0.3, 0.3).degenerate());
}

TEST_CASE("evaluate reproduces the worked ratio examples") {
    const SupportTable t = testutil::uniform_table({1, 7, 10}, {1, 1, 1});
    CHECK(evaluate(t, std::vector<double>{1, 1, 2}) == doctest::Approx(7.0).epsilon(1e-14));

    const SupportTable u = testutil::uniform_table({1, 2, 3}, {1, 1, 1});
    CHECK(evaluate(u, std::vector<double>{2, 1, 1}) == doctest::Approx(1.75).epsilon(1e-14));
}

TEST_CASE("constant weights give the unweighted ratio") {
    RandomStream gen(5);
    auto [t, box] = testutil::random_instance(gen, 7);
    double fsum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < t.num_cells(); ++i) {
        fsum += t.f[i] * t.phat[i];
        gsum += t.g[i] * t.phat[i];
    }
    for (const double c : {0.5, 1.0, 3.0, 17.0}) {
        const std::vector<double> w(t.num_cells(), c);
        CHECK(evaluate(t, w) == doctest::Approx(fsum / gsum).epsilon(1e-12));
    }
}

TEST_CASE("ratio scale invariance") {
    RandomStream gen(6);
    for (int iter = 0; iter < 50; ++iter) {
        auto [t, box] = testutil::random_instance(gen, 2 + gen.below(9));
        std::vector<double> w(t.num_cells());
        for (double& v : w) v = box.lo() + (box.hi() - box.lo()) * gen.uniform01();
        const double base = evaluate(t, w);
        const double c = 0.1 + 5.0 * gen.uniform01();
        std::vector<double> scaled = w;
        for (double& v : scaled) v *= c;
        CHECK(evaluate(t, scaled) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("collapse idempotence matches the row-level estimator") {
    RandomStream gen(7);
    const std::size_t n = 64;
    std::vector<double> values(2 * n);
    for (double& v : values) v = gen.normal();
    ObservationSet obs(std::move(values), 2, {"x", "y"});
    const Estimand est = Estimand::ols(0, 1);
    const SupportTable t = collapse_support(obs, est);
    REQUIRE(t.num_cells() == n); // all rows distinct

    std::vector<double> w(n);
    for (double& v : w) v = 1.0 + 9.0 * gen.uniform01();
    // row-level form: cells appear in first-seen order, so cell k == row k
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += w[i] * est.f(obs.row(i));
        den += w[i] * est.g(obs.row(i));
    }
    CHECK(evaluate(t, w) == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("mean estimand containment in the f range") {
    RandomStream gen(8);
    for (int iter = 0; iter < 30; ++iter) {
        const std::size_t k = 2 + gen.below(8);
        std::vector<double> f(k);
        for (double& v : f) v = -5.0 + 10.0 * gen.uniform01();
        std::vector<std::int64_t> counts(k, 1);
        const SupportTable t = testutil::make_table(f, std::vector<double>(k, 1.0), counts);
        WeightBox box(0.2, 0.8);
        std::vector<double> w(k);
        for (double& v : w) v = box.lo() + (box.hi() - box.lo()) * gen.uniform01();
        const double val = evaluate(t, w);
        const double fmin = *std::min_element(f.begin(), f.end());
        const double fmax = *std::max_element(f.begin(), f.end());
        CHECK(val >= fmin - 1e-12);
        CHECK(val <= fmax + 1e-12);
    }
}

TEST_CASE("zero denominator raises") {
    const SupportTable t = testutil::uniform_table({1.0, 2.0}, {1.0, -1.0});
    CHECK_THROWS_AS(evaluate(t, std::vector<double>{1.0, 1.0}), ZeroDenominator);
    // aggregate denominator safely positive with a g = 0 cell is fine
    const SupportTable u = testutil::uniform_table({1.0, 2.0}, {1.0, 0.0});
    CHECK(evaluate(u, std::vector<double>{1.0, 1.0}) == doctest::Approx(3.0));
}

TEST_CASE("support table validation catches bad bookkeeping") {
    SupportTable t = testutil::uniform_table({1.0, 2.0}, {1.0, 1.0});
    t.phat[0] = 0.9; // masses no longer sum to 1
    CHECK_THROWS_AS(t.validate(), InvalidParameter);
    SupportTable u = testutil::uniform_table({1.0, 2.0}, {1.0, 1.0});
    u.counts[1] = 5;
    CHECK_THROWS_AS(u.validate(), InvalidParameter);
}
