#include "selbounds/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "selbounds/rng.hpp"

namespace selbounds {

double quantile(std::span<const double> draws, double q) {
    if (draws.empty()) throw EmptyDraws();
    if (!(q >= 0.0 && q <= 1.0))
        throw InvalidParameter("quantile level must lie in [0, 1]");
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const std::size_t i = static_cast<std::size_t>(h);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(i);
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

namespace detail {

void bootstrap_resample_counts(std::span<const std::uint32_t> cell_of_row, std::uint64_t seed,
                               std::uint64_t r, std::uint64_t attempt,
                               std::span<double> counts_out) {
    std::fill(counts_out.begin(), counts_out.end(), 0.0);
    RandomStream gen(seed, stream_tag::bootstrap, r, attempt);
    const std::uint64_t n = cell_of_row.size();
    for (std::uint64_t i = 0; i < n; ++i)
        counts_out[cell_of_row[gen.below(n)]] += 1.0;
}

} // namespace detail

BootstrapCI bootstrap_ci(const ObservationSet& obs, const Estimand& est, const WeightBox& box,
                         std::size_t R, double alpha, std::uint64_t seed, unsigned threads) {
    if (R < 100) throw InvalidParameter("bootstrap needs at least 100 resamples");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidParameter("bootstrap level alpha must lie in (0, 1)");

    const CollapseResult base = collapse_support_mapped(obs, est);
    const detail::SortedLfp sorted = detail::presort(base.table);
    const std::size_t k = base.table.num_cells();

    BootstrapCI out;
    out.R = R;
    out.alpha = alpha;
    out.seed = seed;
    out.lo_draws.resize(R);
    out.hi_draws.resize(R);
    std::atomic<std::size_t> failures{0};

    if (threads == 0) threads = std::thread::hardware_concurrency();
    if (threads > R) threads = static_cast<unsigned>(R);
    if (threads == 0) threads = 1;

    constexpr std::uint64_t max_attempts = 64;
    auto run_range = [&](std::size_t lo_r, std::size_t hi_r) {
        std::vector<double> counts(k);
        detail::LfpScratch scratch;
        for (std::size_t r = lo_r; r < hi_r; ++r) {
            std::size_t local_failures = 0;
            for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
                detail::bootstrap_resample_counts(base.cell_of_row, seed, r, attempt, counts);
                try {
                    const detail::BoundsValues v =
                        detail::solve_values(sorted, base.table, counts, box, scratch);
                    out.lo_draws[r] = v.lo;
                    out.hi_draws[r] = v.hi;
                    break;
                } catch (const ZeroDenominator&) {
                    ++local_failures;
                    if (attempt + 1 == max_attempts) throw;
                }
            }
            if (local_failures > 0) failures.fetch_add(local_failures);
        }
    };

    if (threads <= 1) {
        run_range(0, R);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo_r = R * t / threads;
            const std::size_t hi_r = R * (t + 1) / threads;
            pool.emplace_back(run_range, lo_r, hi_r);
        }
        for (auto& th : pool) th.join();
    }

    out.failed_resamples = failures.load();
    if (out.failed_resamples * 100 > R) throw ResampleFailure(out.failed_resamples, R);

    out.c_lo = quantile(out.lo_draws, alpha / 2.0);
    out.c_hi = quantile(out.hi_draws, 1.0 - alpha / 2.0);
    return out;
}

} // namespace selbounds
