#ifndef SELBOUNDS_CONSTRAINTS_HPP
#define SELBOUNDS_CONSTRAINTS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "selbounds/inference.hpp"
#include "selbounds/lfp.hpp"
#include "selbounds/support.hpp"

namespace selbounds {

/// Whether a reported level is a significance (0.05-style) or a coverage
/// (0.95-style) number. Everything internal runs on significance levels.
enum class LevelConvention { Significance, Coverage };

inline double to_significance(double level, LevelConvention conv) {
    return conv == LevelConvention::Significance ? level : 1.0 - level;
}

/// One piece of population-level auxiliary information, together with its
/// slice alpha_share of the feasibility budget alpha1 (significance units).
struct AuxConstraint {
    enum class Kind { ResponseRate, CovariateMean, GenericLinearMoment };
    using RowFn = std::function<double(std::span<const double>)>;

    Kind kind = Kind::ResponseRate;
    double alpha_share = 0.0;
    double response_rate = 0.0; // ResponseRate
    std::size_t column = 0;     // CovariateMean: column of Q within the cell values
    double qbar = 0.0;
    RowFn moment; // GenericLinearMoment: H(t_k)

    static AuxConstraint response(double r, double share) {
        AuxConstraint c;
        c.kind = Kind::ResponseRate;
        c.alpha_share = share;
        c.response_rate = r;
        return c;
    }
    static AuxConstraint covariate_mean(std::size_t column, double qbar, double share) {
        AuxConstraint c;
        c.kind = Kind::CovariateMean;
        c.alpha_share = share;
        c.column = column;
        c.qbar = qbar;
        return c;
    }
    static AuxConstraint generic_moment(RowFn h, double share) {
        AuxConstraint c;
        c.kind = Kind::GenericLinearMoment;
        c.alpha_share = share;
        c.moment = std::move(h);
        return c;
    }
};

/// Smooth sample relaxation of one auxiliary constraint; feasible iff
/// value(w) <= 0. The quadratic kinds use the two-sided t-statistic form,
/// the generic kind the one-sided normal band.
struct RelaxedConstraint {
    std::function<double(std::span<const double>)> value;
    // writes the gradient into grad (same length as w)
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    double scale = 1.0; // multiplier bringing value to O(1) for the solver
    std::string label;
};

RelaxedConstraint build_relaxed_constraint(const AuxConstraint& c, const SupportTable& table,
                                           const WeightBox& box, std::size_t n);

struct SolverDiagnostics {
    std::size_t restarts = 0;
    double best_kkt_residual = 0.0;
    std::vector<double> slack_lo; // -value of each relaxed constraint at w_lo
    std::vector<double> slack_hi;
};

struct SolverOptions {
    std::size_t multistarts = 16;
    double kkt_tol = 1e-7;
    std::size_t max_outer = 60;
    std::size_t max_inner = 500;
    std::uint64_t seed = 0x5eedULL;
};

/// Interval over the box intersected with every relaxed constraint.
struct ConstrainedInterval {
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    std::vector<double> w_lo;
    std::vector<double> w_hi;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    SolverDiagnostics diagnostics;

    double width() const { return beta_hi - beta_lo; }
};

/// Augmented-Lagrangian multi-start solve of the constrained fractional
/// program. alpha1 must equal the sum of the constraint shares; alpha2 is
/// carried through for the confidence step.
ConstrainedInterval solve_constrained_bounds(const SupportTable& table, const WeightBox& box,
                                             const std::vector<AuxConstraint>& constraints,
                                             double alpha1, double alpha2,
                                             const SolverOptions& options = {});

/// Confidence interval at significance alpha2 around the constrained
/// endpoints; total asymptotic coverage of the constrained population
/// interval is at least 1 - alpha1 - alpha2.
AsymptoticCI theorem3_ci(const ConstrainedInterval& ci, const SupportTable& table, double alpha2);

struct ConstrainedProblem {
    const SupportTable* table = nullptr;
    WeightBox box{1.0, 1.0};
    std::vector<AuxConstraint> constraints;
};

struct AlphaSplit {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
};

struct TuneResult {
    std::vector<AlphaSplit> splits;
    std::vector<double> widths;
    std::size_t best_index = 0;
};

/// Evaluates each (alpha1, alpha2) split, rescaling the constraint shares
/// proportionally, and returns the split with the narrowest CI (first wins
/// on ties).
TuneResult tune_alpha_split(const ConstrainedProblem& problem, double total_alpha,
                            const std::vector<AlphaSplit>& splits,
                            const SolverOptions& options = {});

struct EqualityBounds {
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    std::vector<double> w_lo;
    std::vector<double> w_hi;
};

/// Exact extrema of the ratio over the box subject to one linear moment
/// equality sum_k w_k m_k phat_k = 0 (Dinkelbach iteration; the inner box
/// LP with a single equality is solved by a multiplier sweep). Used for
/// population reference intervals and as a feasible solver anchor.
EqualityBounds solve_moment_equality_bounds(const SupportTable& table, const WeightBox& box,
                                            std::span<const double> m_coeff);

} // namespace selbounds

#endif
