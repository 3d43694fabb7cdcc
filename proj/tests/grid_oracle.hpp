#ifndef SELBOUNDS_GRID_ORACLE_HPP
#define SELBOUNDS_GRID_ORACLE_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "selbounds/support.hpp"

namespace testutil {

struct GridResult {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::vector<double> w_lo, w_hi;
    bool found = false;
};

/// Independent multiresolution grid search for the constrained fractional
/// program over a box (K <= 4): a full coarse scan, then repeated 9^K zooms
/// around the incumbents down to well below 1e-3 of the box width.
class ConstrainedGridOracle {
public:
    using Feasible = std::function<bool(std::span<const double>)>;

    ConstrainedGridOracle(const selbounds::SupportTable& table, const selbounds::WeightBox& box,
                          Feasible feasible)
        : t_(table), lo_(box.lo()), hi_(box.hi()), feasible_(std::move(feasible)) {}

    GridResult run() const {
        const std::size_t k = t_.num_cells();
        GridResult best;
        std::size_t g0 = k <= 2 ? 41 : (k == 3 ? 25 : 13);
        scan_full(g0, best);
        if (!best.found) scan_full(k <= 3 ? 61 : 31, best); // denser fallback
        if (!best.found) return best;
        const double h0 = (hi_ - lo_) / static_cast<double>(g0 - 1);
        zoom(best.w_hi, h0, true, best);
        zoom(best.w_lo, h0, false, best);
        return best;
    }

private:
    double beta(std::span<const double> w) const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < t_.num_cells(); ++i) {
            num += w[i] * t_.f[i] * t_.phat[i];
            den += w[i] * t_.g[i] * t_.phat[i];
        }
        return num / den;
    }

    void consider(std::span<const double> w, GridResult& best) const {
        if (!feasible_(w)) return;
        const double b = beta(w);
        if (b > best.hi) {
            best.hi = b;
            best.w_hi.assign(w.begin(), w.end());
        }
        if (b < best.lo) {
            best.lo = b;
            best.w_lo.assign(w.begin(), w.end());
        }
        best.found = true;
    }

    void scan_full(std::size_t g, GridResult& best) const {
        const std::size_t k = t_.num_cells();
        std::vector<std::size_t> idx(k, 0);
        std::vector<double> w(k, lo_);
        const double h = (hi_ - lo_) / static_cast<double>(g - 1);
        while (true) {
            for (std::size_t i = 0; i < k; ++i) w[i] = lo_ + h * static_cast<double>(idx[i]);
            consider(w, best);
            std::size_t d = 0;
            while (d < k && ++idx[d] == g) idx[d++] = 0;
            if (d == k) break;
        }
    }

    void zoom(std::vector<double> center, double h0, bool maximize, GridResult& best) const {
        const std::size_t k = t_.num_cells();
        if (center.empty()) return;
        double h = h0;
        for (int level = 0; level < 14; ++level) {
            std::vector<double> wlo(k), step(k);
            constexpr std::size_t g = 9;
            for (std::size_t i = 0; i < k; ++i) {
                const double a = std::max(lo_, center[i] - 2.0 * h);
                const double b = std::min(hi_, center[i] + 2.0 * h);
                wlo[i] = a;
                step[i] = (b - a) / static_cast<double>(g - 1);
            }
            std::vector<std::size_t> idx(k, 0);
            std::vector<double> w(k);
            double incumbent = maximize ? -std::numeric_limits<double>::infinity()
                                        : std::numeric_limits<double>::infinity();
            std::vector<double> incumbent_w = center;
            while (true) {
                for (std::size_t i = 0; i < k; ++i)
                    w[i] = wlo[i] + step[i] * static_cast<double>(idx[i]);
                if (feasible_(w)) {
                    const double b = beta(w);
                    if (maximize ? b > incumbent : b < incumbent) {
                        incumbent = b;
                        incumbent_w = w;
                    }
                    consider(w, best);
                }
                std::size_t d = 0;
                while (d < k && ++idx[d] == g) idx[d++] = 0;
                if (d == k) break;
            }
            center = incumbent_w;
            h *= 0.5;
        }
    }

    const selbounds::SupportTable& t_;
    double lo_, hi_;
    Feasible feasible_;
};

} // namespace testutil

#endif
