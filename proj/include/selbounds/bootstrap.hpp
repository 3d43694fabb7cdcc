#ifndef SELBOUNDS_BOOTSTRAP_HPP
#define SELBOUNDS_BOOTSTRAP_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "selbounds/estimand.hpp"
#include "selbounds/lfp.hpp"
#include "selbounds/support.hpp"

namespace selbounds {

/// Percentile bootstrap confidence interval: per resample the interval is
/// re-optimized, and the endpoints are the alpha/2 quantile of the lower
/// draws and the 1-alpha/2 quantile of the upper draws.
struct BootstrapCI {
    double c_lo = 0.0;
    double c_hi = 0.0;
    std::size_t R = 0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> lo_draws;
    std::vector<double> hi_draws;
    std::size_t failed_resamples = 0;

    bool contains(double x) const { return x >= c_lo && x <= c_hi; }
    bool covers(double lo, double hi) const { return c_lo <= lo && c_hi >= hi; }
    double width() const { return c_hi - c_lo; }
};

/// Order-statistic percentile with linear interpolation between adjacent
/// order statistics (type-7 convention).
double quantile(std::span<const double> draws, double q);

/// R resamples of the observation rows (with replacement), each re-collapsed
/// and re-optimized. Resample r draws from a substream keyed by (seed, r),
/// so the result is independent of execution order and thread count. A
/// resample whose denominator vanishes is redrawn from a fresh substream;
/// the run aborts when more than 1% of resamples fail.
BootstrapCI bootstrap_ci(const ObservationSet& obs, const Estimand& est, const WeightBox& box,
                         std::size_t R, double alpha, std::uint64_t seed, unsigned threads = 1);

namespace detail {

/// Resample cell counts exactly as bootstrap_ci does for resample
/// (seed, r, attempt); exposed so tests can replay individual resamples.
void bootstrap_resample_counts(std::span<const std::uint32_t> cell_of_row, std::uint64_t seed,
                               std::uint64_t r, std::uint64_t attempt,
                               std::span<double> counts_out);

} // namespace detail

} // namespace selbounds

#endif
