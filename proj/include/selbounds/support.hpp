#ifndef SELBOUNDS_SUPPORT_HPP
#define SELBOUNDS_SUPPORT_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "selbounds/errors.hpp"
#include "selbounds/estimand.hpp"

namespace selbounds {

/// Raw observations T_i, one row per individual, no missing cells.
class ObservationSet {
public:
    ObservationSet(std::vector<double> values, std::size_t n_cols,
                   std::vector<std::string> column_names = {});

    std::size_t rows() const { return n_rows_; }
    std::size_t cols() const { return n_cols_; }
    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * n_cols_, n_cols_};
    }
    const std::vector<double>& values() const { return values_; }
    const std::vector<std::string>& column_names() const { return column_names_; }

    /// Index of a named column; throws DataError if absent.
    std::size_t column_index(const std::string& name) const;

private:
    std::vector<double> values_; // row-major, n_rows x n_cols
    std::size_t n_rows_;
    std::size_t n_cols_;
    std::vector<std::string> column_names_;
};

/// Collapsed discrete support: distinct observation values t_k with their
/// empirical masses and the estimand evaluations f(t_k), g(t_k).
/// Stored struct-of-arrays; cell k's value vector is values[k*dim .. k*dim+dim).
struct SupportTable {
    std::size_t dim = 0;
    std::size_t n = 0;
    std::vector<double> values;
    std::vector<std::int64_t> counts; // empty for tables built from exact masses
    std::vector<double> phat;
    std::vector<double> f;
    std::vector<double> g;

    std::size_t num_cells() const { return phat.size(); }
    std::span<const double> cell(std::size_t k) const { return {values.data() + k * dim, dim}; }

    /// Checks the mass/count bookkeeping; throws InvalidParameter on violation.
    void validate() const;
};

struct CollapseResult {
    SupportTable table;
    std::vector<std::uint32_t> cell_of_row;
};

/// Collapse rows onto their distinct values (bit-exact comparison, -0.0
/// canonicalized to +0.0) and evaluate the estimand once per cell.
SupportTable collapse_support(const ObservationSet& obs, const Estimand& est);

/// collapse_support plus the row -> cell mapping (used by the bootstrap).
CollapseResult collapse_support_mapped(const ObservationSet& obs, const Estimand& est);

/// Inverse-probability weight box W = [1/b, 1/a]^K from the probability
/// bounds 0 < a <= b <= 1.
class WeightBox {
public:
    WeightBox(double a, double b);

    double a() const { return a_; }
    double b() const { return b_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    bool degenerate() const { return lo_ == hi_; }

private:
    double a_, b_, lo_, hi_;
};

/// Weighted ratio estimator: sum_k w_k f_k phat_k / sum_k w_k g_k phat_k.
/// Compensated summation; throws ZeroDenominator when the denominator
/// vanishes relative to its term magnitudes.
double evaluate(const SupportTable& table, std::span<const double> w);

namespace warnings {
using Handler = void (*)(const std::string&);
/// Replaces the warning sink (default writes to stderr); returns the old one.
Handler set_handler(Handler h);
void emit(const std::string& msg);
} // namespace warnings

} // namespace selbounds

#endif
