#ifndef SELBOUNDS_LFP_HPP
#define SELBOUNDS_LFP_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "selbounds/support.hpp"

namespace selbounds {

/// Estimated identified interval with the optimizing vertex weights.
/// degenerate_cells_* lists cells whose ratio f_k/g_k equals the optimal
/// value, where the optimum is attained by more than one weight vector.
struct IntervalEstimate {
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    std::vector<double> w_lo;
    std::vector<double> w_hi;
    std::vector<std::size_t> degenerate_cells_lo;
    std::vector<std::size_t> degenerate_cells_hi;
};

/// Exact extrema of the weighted ratio over the box via threshold
/// enumeration: cells sorted by f_k/g_k, the single switch point of the
/// optimal weight structure enumerated with running prefix sums.
/// O(K log K). Requires the denominator to stay positive over the box.
IntervalEstimate solve_bounds(const SupportTable& table, const WeightBox& box);

/// Verification oracle: enumerates all 2^K vertices of the box directly.
/// Requires K <= 20.
IntervalEstimate solve_bounds_bruteforce(const SupportTable& table, const WeightBox& box);

enum class Direction { Max, Min };

/// First-order global optimality test for a vertex weight vector: with
/// q_k = w_k - (lo + hi - w_k), beta is the global max iff
/// q_k f_k >= beta q_k g_k for every cell (reversed for the min).
bool check_global_optimality(const SupportTable& table, const WeightBox& box,
                             std::span<const double> w, double beta, Direction dir);

namespace detail {

/// Ratio-sorted cell order reusable across resamples of the same table
/// (the order depends only on f, g, not on the masses).
struct SortedLfp {
    std::vector<std::uint32_t> order; // active cells, ascending f/g
    std::vector<std::uint8_t> flip;   // per table cell: g_k < 0
    std::vector<std::uint8_t> inert;  // per table cell: f_k = g_k = 0
};

SortedLfp presort(const SupportTable& table);

struct BoundsValues {
    double lo = 0.0;
    double hi = 0.0;
};

/// Interval endpoints only, for externally supplied cell masses (need not be
/// normalized; zero masses allowed). Scratch buffers are caller-provided so
/// resample loops do not allocate.
struct LfpScratch {
    std::vector<double> pref_f, pref_g, suf_f, suf_g;
};

BoundsValues solve_values(const SortedLfp& sorted, const SupportTable& table,
                          std::span<const double> mass, const WeightBox& box,
                          LfpScratch& scratch);

} // namespace detail

} // namespace selbounds

#endif
