#ifndef SELBOUNDS_PARAMETRIC_HPP
#define SELBOUNDS_PARAMETRIC_HPP

#include <cstdint>
#include <vector>

#include "selbounds/estimand.hpp"
#include "selbounds/support.hpp"

namespace selbounds {

/// Per-coefficient direction-of-selection knowledge. Zero pins a coefficient
/// (equivalent to imposing NonNegative and NonPositive at once).
enum class SignConstraint { Free, NonNegative, NonPositive, Zero };

/// Generalized-linear weight family lambda_i = h(alpha0 + alpha1' D_i) with
/// the logit link h(u) = 1 + exp(u), whose image automatically satisfies
/// lambda >= 1.
struct ParametricFamily {
    enum class Link { Logit };
    Link link = Link::Logit;
    std::vector<std::size_t> selection_columns; // columns of D in the observation set
    std::vector<SignConstraint> sign_constraints; // per column; empty means all Free
};

/// Linear inequality system A alpha <= rhs over alpha = (alpha0, alpha1..d),
/// plus the coordinates pinned to zero by sign constraints.
struct AlphaPolytope {
    std::size_t dim = 0; // d + 1
    std::vector<double> A; // row-major, rows() x dim
    std::vector<double> rhs;
    std::vector<bool> pinned; // length dim; pinned[j] => alpha_j = 0
    double link_lower = 0.0;  // h^{-1}(1/b), -inf when b = 1 (vacuous side)
    double link_upper = 0.0;  // h^{-1}(1/a)

    std::size_t rows() const { return rhs.size(); }
};

/// Box-implied half-spaces h^{-1}(1/b) <= alpha0 + alpha1' D_i <= h^{-1}(1/a)
/// over the deduplicated sample rows, plus sign half-spaces. With b = 1 the
/// lower link bound is vacuous (the logit image already exceeds 1) and only
/// the upper half-spaces are kept.
AlphaPolytope feasible_alpha_polytope(const ObservationSet& obs, const WeightBox& box,
                                      const ParametricFamily& family);

struct ParametricDiagnostics {
    std::size_t restarts = 0;
    std::vector<std::size_t> active_constraints_lo; // polytope rows active at the optimum
    std::vector<std::size_t> active_constraints_hi;
};

struct ParametricInterval {
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    std::vector<double> alpha_lo; // length d + 1
    std::vector<double> alpha_hi;
    ParametricDiagnostics diagnostics;

    double width() const { return beta_hi - beta_lo; }
};

struct ParametricOptions {
    std::size_t multistarts = 32;
    std::uint64_t seed = 0x9a7aULL;
    std::size_t max_iterations = 250; // per barrier stage
};

/// Extrema of the row-level weighted ratio over the parametric weight
/// family: multi-start quasi-Newton with a log barrier on the polytope.
ParametricInterval solve_parametric_bounds(const ObservationSet& obs, const Estimand& est,
                                           const WeightBox& box, const ParametricFamily& family,
                                           const ParametricOptions& options = {});

} // namespace selbounds

#endif
