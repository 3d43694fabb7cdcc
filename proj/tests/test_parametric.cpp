#include <doctest.h>

#include <cmath>

#include "selbounds/lfp.hpp"
#include "selbounds/parametric.hpp"
#include "selbounds/rng.hpp"
#include "test_util.hpp"

using namespace selbounds;

namespace {

/// rows: (y, d1[, d2]); estimand: mean of y
ObservationSet random_obs(RandomStream& gen, std::size_t n, std::size_t d) {
    std::vector<double> values;
    values.reserve(n * (1 + d));
    for (std::size_t i = 0; i < n; ++i) {
        values.push_back(gen.normal());
        for (std::size_t j = 0; j < d; ++j)
            values.push_back(std::round(4.0 * gen.uniform01()) / 2.0); // few distinct levels
    }
    std::vector<std::string> names{"y"};
    for (std::size_t j = 0; j < d; ++j) names.push_back("d" + std::to_string(j + 1));
    return ObservationSet(std::move(values), 1 + d, std::move(names));
}

double logit_weight(double u) { return 1.0 + std::exp(u); }

/// independent parametric objective used by the grid oracle
double rho(const ObservationSet& obs, const Estimand& est,
           const std::vector<std::size_t>& cols, std::span<const double> alpha) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < obs.rows(); ++i) {
        const auto row = obs.row(i);
        double u = alpha[0];
        for (std::size_t j = 0; j < cols.size(); ++j) u += alpha[j + 1] * row[cols[j]];
        const double lam = logit_weight(u);
        num += lam * est.f(row);
        den += lam * est.g(row);
    }
    return num / den;
}

} // namespace

TEST_CASE("polytope bounds for the logit link") {
    RandomStream gen(71);
    const ObservationSet obs = random_obs(gen, 20, 1);
    ParametricFamily fam;
    fam.selection_columns = {1};

    const AlphaPolytope poly = feasible_alpha_polytope(obs, WeightBox(0.01, 0.5), fam);
    CHECK(poly.link_lower == doctest::Approx(0.0));          // log(2 - 1)
    CHECK(poly.link_upper == doctest::Approx(std::log(99.0))); // log(100 - 1)
    CHECK(poly.dim == 2);

    // b = 1: the lower side is vacuous, only upper half-spaces remain
    const AlphaPolytope open_poly = feasible_alpha_polytope(obs, WeightBox(0.01, 1.0), fam);
    CHECK(std::isinf(open_poly.link_lower));
    CHECK(open_poly.rows() < poly.rows());
}

TEST_CASE("duplicate rows deduplicate to one half-space pair") {
    std::vector<double> values;
    for (int i = 0; i < 10; ++i) values.insert(values.end(), {1.0 * (i % 2), 3.0});
    const ObservationSet obs(std::move(values), 2, {"y", "d"});
    ParametricFamily fam;
    fam.selection_columns = {1};
    const AlphaPolytope poly = feasible_alpha_polytope(obs, WeightBox(0.1, 0.5), fam);
    // one distinct D value -> two half-spaces, no sign rows
    CHECK(poly.rows() == 2);
}

TEST_CASE("intercept-only family collapses to the unweighted estimate") {
    RandomStream gen(72);
    const ObservationSet obs = random_obs(gen, 60, 0);
    const Estimand est = Estimand::mean(0);
    ParametricFamily fam; // d = 0
    const ParametricInterval pi = solve_parametric_bounds(obs, est, WeightBox(0.1, 0.8), fam);
    double s = 0.0;
    for (std::size_t i = 0; i < obs.rows(); ++i) s += obs.row(i)[0];
    const double unweighted = s / static_cast<double>(obs.rows());
    CHECK(pi.beta_lo == doctest::Approx(unweighted).epsilon(1e-7));
    CHECK(pi.beta_hi == doctest::Approx(unweighted).epsilon(1e-7));
}

TEST_CASE("pinning every coefficient matches the intercept-only collapse") {
    RandomStream gen(73);
    const ObservationSet obs = random_obs(gen, 60, 2);
    const Estimand est = Estimand::mean(0);
    ParametricFamily fam;
    fam.selection_columns = {1, 2};
    fam.sign_constraints = {SignConstraint::Zero, SignConstraint::Zero};
    const ParametricInterval pi = solve_parametric_bounds(obs, est, WeightBox(0.1, 0.8), fam);
    double s = 0.0;
    for (std::size_t i = 0; i < obs.rows(); ++i) s += obs.row(i)[0];
    const double unweighted = s / static_cast<double>(obs.rows());
    CHECK(pi.beta_lo == doctest::Approx(unweighted).epsilon(1e-7));
    CHECK(pi.beta_hi == doctest::Approx(unweighted).epsilon(1e-7));
}

TEST_CASE("degenerate box collapses to the unweighted estimate") {
    RandomStream gen(74);
    const ObservationSet obs = random_obs(gen, 40, 1);
    ParametricFamily fam;
    fam.selection_columns = {1};
    const ParametricInterval pi =
        solve_parametric_bounds(obs, Estimand::mean(0), WeightBox(0.4, 0.4), fam);
    CHECK(pi.beta_lo == doctest::Approx(pi.beta_hi));
}

TEST_CASE("parametric interval is contained in the nonparametric interval") {
    RandomStream gen(75);
    for (int iter = 0; iter < 30; ++iter) {
        const std::size_t d = 1 + gen.below(2);
        const ObservationSet obs = random_obs(gen, 40 + gen.below(60), d);
        const Estimand est = Estimand::mean(0);
        const WeightBox box(0.05 + 0.3 * gen.uniform01(), 1.0);
        ParametricFamily fam;
        for (std::size_t j = 0; j < d; ++j) fam.selection_columns.push_back(j + 1);
        const ParametricInterval pi = solve_parametric_bounds(obs, est, box, fam);
        const IntervalEstimate np = solve_bounds(collapse_support(obs, est), box);
        CHECK(pi.beta_lo >= np.beta_lo - 1e-6);
        CHECK(pi.beta_hi <= np.beta_hi + 1e-6);
        // implied weights respect the box
        for (const auto& alpha : {pi.alpha_lo, pi.alpha_hi}) {
            for (std::size_t i = 0; i < obs.rows(); ++i) {
                double u = alpha[0];
                for (std::size_t j = 0; j < d; ++j)
                    u += alpha[j + 1] * obs.row(i)[fam.selection_columns[j]];
                const double lam = logit_weight(u);
                CHECK(lam >= box.lo() - 1e-8);
                CHECK(lam <= box.hi() + 1e-8);
            }
        }
    }
}

TEST_CASE("solver matches a dense alpha grid for d = 1") {
    RandomStream gen(76);
    for (int iter = 0; iter < 3; ++iter) {
        const ObservationSet obs = random_obs(gen, 60, 1);
        const Estimand est = Estimand::mean(0);
        const WeightBox box(0.05, 1.0);
        ParametricFamily fam;
        fam.selection_columns = {1};
        const ParametricInterval pi = solve_parametric_bounds(obs, est, box, fam);

        // coarse-to-fine grid over (alpha0, alpha1) within the polytope
        const AlphaPolytope poly = feasible_alpha_polytope(obs, box, fam);
        double dmin = 1e300, dmax = -1e300;
        for (std::size_t i = 0; i < obs.rows(); ++i) {
            dmin = std::min(dmin, obs.row(i)[1]);
            dmax = std::max(dmax, obs.row(i)[1]);
        }
        const double u_hi = poly.link_upper;
        auto feasible = [&](double a0, double a1) {
            const double u1 = a0 + a1 * dmin, u2 = a0 + a1 * dmax;
            return std::max(u1, u2) <= u_hi;
        };
        double lo = 1e300, hi = -1e300;
        double c0 = 0.0, c1 = 0.0, span0 = 30.0, span1 = 30.0;
        double best_lo0 = 0, best_lo1 = 0, best_hi0 = 0, best_hi1 = 0;
        for (int level = 0; level < 8; ++level) {
            const int g = level == 0 ? 220 : 40;
            double nlo = lo, nhi = hi;
            for (int i = 0; i <= g; ++i) {
                for (int j = 0; j <= g; ++j) {
                    const double a0 = c0 - span0 + 2.0 * span0 * i / g;
                    const double a1 = c1 - span1 + 2.0 * span1 * j / g;
                    if (!feasible(a0, a1)) continue;
                    const double b = rho(obs, est, fam.selection_columns, std::vector<double>{a0, a1});
                    if (b < nlo) {
                        nlo = b;
                        best_lo0 = a0;
                        best_lo1 = a1;
                    }
                    if (b > nhi) {
                        nhi = b;
                        best_hi0 = a0;
                        best_hi1 = a1;
                    }
                }
            }
            lo = nlo;
            hi = nhi;
            // zoom alternately around the two incumbents
            if (level % 2 == 0) {
                c0 = best_hi0;
                c1 = best_hi1;
            } else {
                c0 = best_lo0;
                c1 = best_lo1;
            }
            span0 *= 0.35;
            span1 *= 0.35;
        }
        CHECK(pi.beta_hi >= hi - 5e-3);
        CHECK(pi.beta_lo <= lo + 5e-3);
        // the solver must not beat the true feasible extrema either
        CHECK(pi.beta_hi <= hi + 5e-3 + 0.05 * std::fabs(hi));
        CHECK(pi.beta_lo >= lo - 5e-3 - 0.05 * std::fabs(lo));
    }
}

TEST_CASE("relaxing a sign constraint never shrinks the interval") {
    RandomStream gen(77);
    for (int iter = 0; iter < 8; ++iter) {
        const ObservationSet obs = random_obs(gen, 50, 1);
        const WeightBox box(0.1, 1.0);
        ParametricFamily constrained;
        constrained.selection_columns = {1};
        constrained.sign_constraints = {SignConstraint::NonNegative};
        ParametricFamily free;
        free.selection_columns = {1};
        const ParametricInterval narrow =
            solve_parametric_bounds(obs, Estimand::mean(0), box, constrained);
        const ParametricInterval wide =
            solve_parametric_bounds(obs, Estimand::mean(0), box, free);
        CHECK(wide.beta_lo <= narrow.beta_lo + 1e-6);
        CHECK(wide.beta_hi >= narrow.beta_hi - 1e-6);
        CHECK(narrow.alpha_lo[1] >= -1e-9);
        CHECK(narrow.alpha_hi[1] >= -1e-9);
    }
}

TEST_CASE("dimension cap") {
    RandomStream gen(78);
    const ObservationSet obs = random_obs(gen, 25, 2);
    ParametricFamily fam;
    fam.selection_columns.assign(21, 1);
    CHECK_THROWS_AS(solve_parametric_bounds(obs, Estimand::mean(0), WeightBox(0.1, 1.0), fam),
                    InvalidParameter);
}
