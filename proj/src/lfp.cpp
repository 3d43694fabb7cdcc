#include "selbounds/lfp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace selbounds {

namespace detail {

SortedLfp presort(const SupportTable& table) {
    const std::size_t k = table.num_cells();
    SortedLfp s;
    s.flip.assign(k, 0);
    s.inert.assign(k, 0);
    std::vector<std::pair<double, std::uint32_t>> keys;
    keys.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double f = table.f[i];
        const double g = table.g[i];
        if (f == 0.0 && g == 0.0) {
            s.inert[i] = 1; // contributes to neither sum; pinned at lo
            continue;
        }
        s.flip[i] = g < 0.0 ? 1 : 0;
        double ratio;
        if (g != 0.0)
            ratio = f / g;
        else
            ratio = f > 0.0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
        keys.emplace_back(ratio, static_cast<std::uint32_t>(i));
    }
    std::sort(keys.begin(), keys.end());
    s.order.reserve(keys.size());
    for (const auto& [ratio, idx] : keys) s.order.push_back(idx);
    return s;
}

namespace {

struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
};

struct EnumResult {
    double val_lo, val_hi;
    std::size_t m_lo, m_hi; // switch positions in the sorted order
};

// Enumerates the K+1 switch positions for both directions. Cells with g < 0
// enter through the substitution v = lo + hi - w, which flips the sign of
// their (f, g) contribution and adds the constant (lo + hi) * (f, g) * mass;
// after the substitution every active cell has a nonnegative denominator
// coefficient and the optimal weights are lo on a ratio-sorted prefix and hi
// on the suffix (mirrored for the minimum).
EnumResult enumerate_thresholds(const SortedLfp& sorted, const SupportTable& table,
                                std::span<const double> mass, const WeightBox& box,
                                LfpScratch& scratch) {
    const std::size_t m_active = sorted.order.size();
    const double lo = box.lo(), hi = box.hi();

    KahanSum cf, cg;
    double g_mag = 0.0;
    for (std::size_t j = 0; j < m_active; ++j) {
        const std::uint32_t cell = sorted.order[j];
        g_mag += std::fabs(table.g[cell]) * mass[cell];
        if (sorted.flip[cell]) {
            cf.add((lo + hi) * table.f[cell] * mass[cell]);
            cg.add((lo + hi) * table.g[cell] * mass[cell]);
        }
    }

    auto& pre_f = scratch.pref_f;
    auto& pre_g = scratch.pref_g;
    auto& suf_f = scratch.suf_f;
    auto& suf_g = scratch.suf_g;
    pre_f.resize(m_active + 1);
    pre_g.resize(m_active + 1);
    suf_f.resize(m_active + 1);
    suf_g.resize(m_active + 1);

    KahanSum af, ag;
    pre_f[0] = 0.0;
    pre_g[0] = 0.0;
    for (std::size_t j = 0; j < m_active; ++j) {
        const std::uint32_t cell = sorted.order[j];
        const double sgn = sorted.flip[cell] ? -1.0 : 1.0;
        af.add(sgn * table.f[cell] * mass[cell]);
        ag.add(sgn * table.g[cell] * mass[cell]);
        pre_f[j + 1] = af.s;
        pre_g[j + 1] = ag.s;
    }
    KahanSum bf, bg;
    suf_f[m_active] = 0.0;
    suf_g[m_active] = 0.0;
    for (std::size_t j = m_active; j-- > 0;) {
        const std::uint32_t cell = sorted.order[j];
        const double sgn = sorted.flip[cell] ? -1.0 : 1.0;
        bf.add(sgn * table.f[cell] * mass[cell]);
        bg.add(sgn * table.g[cell] * mass[cell]);
        suf_f[j] = bf.s;
        suf_g[j] = bg.s;
    }

    // Denominator must stay positive over the whole box: the transformed
    // coefficients are nonnegative, so the minimum is at v = lo everywhere.
    const double den_min = cg.s + lo * pre_g[m_active];
    if (!(den_min > 1e-13 * g_mag * hi))
        throw ZeroDenominator("weighted denominator is not positive over the weight box");

    EnumResult r{};
    r.val_hi = -std::numeric_limits<double>::infinity();
    r.val_lo = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m <= m_active; ++m) {
        const double num_hi = cf.s + lo * pre_f[m] + hi * suf_f[m];
        const double den_hi = cg.s + lo * pre_g[m] + hi * suf_g[m];
        const double v_hi = num_hi / den_hi;
        if (v_hi > r.val_hi) {
            r.val_hi = v_hi;
            r.m_hi = m;
        }
        const double num_lo = cf.s + hi * pre_f[m] + lo * suf_f[m];
        const double den_lo = cg.s + hi * pre_g[m] + lo * suf_g[m];
        const double v_lo = num_lo / den_lo;
        if (v_lo < r.val_lo) {
            r.val_lo = v_lo;
            r.m_lo = m;
        }
    }
    return r;
}

std::vector<double> mass_buffer(const SupportTable& table) {
    std::vector<double> mass(table.num_cells());
    if (!table.counts.empty()) {
        // Integer counts keep the arithmetic exact for integer-valued f, g.
        for (std::size_t i = 0; i < mass.size(); ++i)
            mass[i] = static_cast<double>(table.counts[i]);
    } else {
        mass.assign(table.phat.begin(), table.phat.end());
    }
    return mass;
}

std::vector<std::size_t> degenerate_cells(const SortedLfp& sorted, const SupportTable& table,
                                          double beta) {
    std::vector<std::size_t> out;
    for (const std::uint32_t cell : sorted.order) {
        const double f = table.f[cell];
        const double bg = beta * table.g[cell];
        if (std::fabs(f - bg) <= 1e-12 * (std::fabs(f) + std::fabs(bg)))
            out.push_back(cell);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

BoundsValues solve_values(const SortedLfp& sorted, const SupportTable& table,
                          std::span<const double> mass, const WeightBox& box,
                          LfpScratch& scratch) {
    const EnumResult r = enumerate_thresholds(sorted, table, mass, box, scratch);
    return {r.val_lo, r.val_hi};
}

} // namespace detail

IntervalEstimate solve_bounds(const SupportTable& table, const WeightBox& box) {
    const std::size_t k = table.num_cells();
    if (k == 0) throw EmptyInput("support table has no cells");
    const detail::SortedLfp sorted = detail::presort(table);
    const std::vector<double> mass = detail::mass_buffer(table);
    detail::LfpScratch scratch;
    const detail::EnumResult r =
        detail::enumerate_thresholds(sorted, table, mass, box, scratch);

    IntervalEstimate est;
    est.beta_lo = r.val_lo;
    est.beta_hi = r.val_hi;
    const double lo = box.lo(), hi = box.hi();
    est.w_lo.assign(k, lo);
    est.w_hi.assign(k, lo);
    for (std::size_t j = 0; j < sorted.order.size(); ++j) {
        const std::uint32_t cell = sorted.order[j];
        const double v_hi = j < r.m_hi ? lo : hi;
        const double v_lo = j < r.m_lo ? hi : lo;
        est.w_hi[cell] = sorted.flip[cell] ? lo + hi - v_hi : v_hi;
        est.w_lo[cell] = sorted.flip[cell] ? lo + hi - v_lo : v_lo;
    }
    est.degenerate_cells_lo = detail::degenerate_cells(sorted, table, est.beta_lo);
    est.degenerate_cells_hi = detail::degenerate_cells(sorted, table, est.beta_hi);
    return est;
}

IntervalEstimate solve_bounds_bruteforce(const SupportTable& table, const WeightBox& box) {
    const std::size_t k = table.num_cells();
    if (k == 0) throw EmptyInput("support table has no cells");
    if (k > 20) throw SupportTooLarge(k);

    // same mass convention as solve_bounds (integer counts stay exact), but
    // a plain per-vertex summation independent of the threshold machinery
    const std::vector<double> mass = detail::mass_buffer(table);
    const double lo = box.lo(), hi = box.hi();
    std::vector<double> w(k, lo);
    IntervalEstimate est;
    est.beta_lo = std::numeric_limits<double>::infinity();
    est.beta_hi = -std::numeric_limits<double>::infinity();
    for (std::uint64_t bits = 0; bits < (1ULL << k); ++bits) {
        for (std::size_t i = 0; i < k; ++i) w[i] = (bits >> i) & 1 ? hi : lo;
        double num = 0.0, den = 0.0, den_mag = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            num += w[i] * table.f[i] * mass[i];
            const double term = w[i] * table.g[i] * mass[i];
            den += term;
            den_mag += std::fabs(term);
        }
        if (den == 0.0 || std::fabs(den) < 1e-13 * den_mag)
            throw ZeroDenominator("weighted denominator vanishes at a box vertex");
        const double val = num / den;
        if (val > est.beta_hi) {
            est.beta_hi = val;
            est.w_hi = w;
        }
        if (val < est.beta_lo) {
            est.beta_lo = val;
            est.w_lo = w;
        }
    }
    const detail::SortedLfp sorted = detail::presort(table);
    est.degenerate_cells_lo = detail::degenerate_cells(sorted, table, est.beta_lo);
    est.degenerate_cells_hi = detail::degenerate_cells(sorted, table, est.beta_hi);
    return est;
}

bool check_global_optimality(const SupportTable& table, const WeightBox& box,
                             std::span<const double> w, double beta, Direction dir) {
    const std::size_t k = table.num_cells();
    if (w.size() != k)
        throw InvalidParameter("weight vector length does not match cell count");
    const double lo = box.lo(), hi = box.hi();
    const double vertex_tol = 1e-12 * (1.0 + hi);
    for (std::size_t i = 0; i < k; ++i) {
        if (std::fabs(w[i] - lo) > vertex_tol && std::fabs(w[i] - hi) > vertex_tol)
            throw NotAVertex("weight " + std::to_string(w[i]) + " at cell " + std::to_string(i) +
                             " is not a box vertex coordinate");
    }
    for (std::size_t i = 0; i < k; ++i) {
        const double q = 2.0 * w[i] - lo - hi;
        const double lhs = q * (table.f[i] - beta * table.g[i]);
        const double tol =
            1e-9 * (hi - lo + 1.0) * (std::fabs(table.f[i]) + std::fabs(beta * table.g[i]) + 1.0);
        if (dir == Direction::Max ? lhs < -tol : lhs > tol) return false;
    }
    return true;
}

} // namespace selbounds
