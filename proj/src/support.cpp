#include "selbounds/support.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <iostream>

#include "selbounds/rng.hpp"

namespace selbounds {

ObservationSet::ObservationSet(std::vector<double> values, std::size_t n_cols,
                               std::vector<std::string> column_names)
    : values_(std::move(values)), n_cols_(n_cols), column_names_(std::move(column_names)) {
    if (n_cols_ == 0) throw InvalidParameter("observation set needs at least one column");
    if (values_.size() % n_cols_ != 0)
        throw InvalidParameter("observation buffer size is not a multiple of the column count");
    n_rows_ = values_.size() / n_cols_;
    if (n_rows_ < 2) throw EmptyInput("observation set needs at least 2 rows");
    if (!column_names_.empty() && column_names_.size() != n_cols_)
        throw InvalidParameter("column name count does not match column count");
}

std::size_t ObservationSet::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < column_names_.size(); ++j)
        if (column_names_[j] == name) return j;
    throw DataError("no column named '" + name + "'");
}

void SupportTable::validate() const {
    const std::size_t k = num_cells();
    if (k == 0) throw InvalidParameter("support table has no cells");
    if (values.size() != k * dim || f.size() != k || g.size() != k)
        throw InvalidParameter("support table arrays are inconsistently sized");
    double mass = 0.0;
    for (double p : phat) {
        if (!(p > 0.0)) throw InvalidParameter("support table contains a non-positive mass");
        mass += p;
    }
    if (std::fabs(mass - 1.0) > 1e-12)
        throw InvalidParameter("support masses sum to " + std::to_string(mass) + ", expected 1");
    if (!counts.empty()) {
        if (counts.size() != k)
            throw InvalidParameter("support table count array is inconsistently sized");
        std::int64_t total = 0;
        for (std::int64_t c : counts) total += c;
        if (static_cast<std::size_t>(total) != n)
            throw InvalidParameter("support cell counts do not sum to n");
    }
}

namespace {

// -0.0 and +0.0 compare equal; canonicalize so they hash identically too.
inline double canonical(double v) { return v == 0.0 ? 0.0 : v; }

inline std::uint64_t hash_row(const double* row, std::size_t dim) {
    std::uint64_t h = 0x51'7c'c1'b7'27'22'0a'95ULL;
    for (std::size_t j = 0; j < dim; ++j) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(canonical(row[j]));
        h = mix64(h ^ bits);
    }
    return h;
}

inline void require_finite(double v, std::size_t row, const char* which) {
    if (!std::isfinite(v)) throw NonFiniteEvaluation(row, which);
}

} // namespace

CollapseResult collapse_support_mapped(const ObservationSet& obs, const Estimand& est) {
    const std::size_t n = obs.rows();
    const std::size_t dim = obs.cols();
    if (est.max_column() >= dim)
        throw InvalidParameter("estimand reads a column beyond the observation width");

    // Open-addressing table over cell indices; row bytes compared on collision.
    std::size_t slots = 16;
    while (slots < 2 * n) slots <<= 1;
    const std::size_t mask = slots - 1;
    std::vector<std::uint32_t> slot_cell(slots, UINT32_MAX);

    CollapseResult out;
    SupportTable& t = out.table;
    t.dim = dim;
    t.n = n;
    out.cell_of_row.resize(n);

    std::vector<double> key(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = obs.row(i);
        for (std::size_t j = 0; j < dim; ++j) key[j] = canonical(row[j]);
        const std::uint64_t h = hash_row(row.data(), dim);
        std::size_t s = h & mask;
        std::uint32_t cell = UINT32_MAX;
        while (true) {
            const std::uint32_t c = slot_cell[s];
            if (c == UINT32_MAX) break;
            if (std::memcmp(t.values.data() + static_cast<std::size_t>(c) * dim, key.data(),
                            dim * sizeof(double)) == 0) {
                cell = c;
                break;
            }
            s = (s + 1) & mask;
        }
        if (cell == UINT32_MAX) {
            cell = static_cast<std::uint32_t>(t.counts.size());
            slot_cell[s] = cell;
            t.values.insert(t.values.end(), key.begin(), key.end());
            t.counts.push_back(0);
            const double fv = est.f(row);
            require_finite(fv, i, "f");
            const double gv = est.g(row);
            require_finite(gv, i, "g");
            t.f.push_back(fv);
            t.g.push_back(gv);
        }
        ++t.counts[cell];
        out.cell_of_row[i] = cell;
    }

    const std::size_t k = t.counts.size();
    t.phat.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        t.phat[c] = static_cast<double>(t.counts[c]) / static_cast<double>(n);

    if (static_cast<double>(k) > 0.9 * static_cast<double>(n))
        warnings::emit("support is nearly continuous: " + std::to_string(k) + " distinct cells over " +
                       std::to_string(n) + " rows");
    return out;
}

SupportTable collapse_support(const ObservationSet& obs, const Estimand& est) {
    return collapse_support_mapped(obs, est).table;
}

WeightBox::WeightBox(double a, double b) : a_(a), b_(b) {
    if (!(a > 0.0) || !(b > 0.0) || a > b || b > 1.0)
        throw InvalidParameter("weight box needs 0 < a <= b <= 1");
    lo_ = 1.0 / b_;
    hi_ = 1.0 / a_;
}

double evaluate(const SupportTable& table, std::span<const double> w) {
    const std::size_t k = table.num_cells();
    if (w.size() != k)
        throw InvalidParameter("weight vector length does not match cell count");
    double num = 0.0, cnum = 0.0;
    double den = 0.0, cden = 0.0;
    double den_mag = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double wp = w[i] * table.phat[i];
        // Kahan updates for both running sums.
        {
            const double y = wp * table.f[i] - cnum;
            const double s = num + y;
            cnum = (s - num) - y;
            num = s;
        }
        {
            const double term = wp * table.g[i];
            const double y = term - cden;
            const double s = den + y;
            cden = (s - den) - y;
            den = s;
            den_mag += std::fabs(term);
        }
    }
    if (den == 0.0 || std::fabs(den) < 1e-13 * den_mag)
        throw ZeroDenominator("weighted denominator vanishes at the supplied weights");
    return num / den;
}

namespace warnings {

namespace {
void default_handler(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }
std::atomic<Handler> g_handler{&default_handler};
} // namespace

Handler set_handler(Handler h) { return g_handler.exchange(h ? h : &default_handler); }

void emit(const std::string& msg) { g_handler.load()(msg); }

} // namespace warnings

} // namespace selbounds
