#ifndef SELBOUNDS_ESTIMAND_HPP
#define SELBOUNDS_ESTIMAND_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <utility>

namespace selbounds {

/// An estimand defined through the moment condition E[f(T) - beta g(T)] = 0,
/// i.e. beta = E[f(T)] / E[g(T)]. Built-in variants cover the population
/// mean, OLS and IV slopes; Custom admits any (f, g) pair.
class Estimand {
public:
    enum class Kind { Mean, OLS, IV, Custom };
    using RowFn = std::function<double(std::span<const double>)>;

    /// f = y, g = 1.
    static Estimand mean(std::size_t y_col) {
        Estimand e(Kind::Mean);
        e.y_ = y_col;
        return e;
    }

    /// f = x*y, g = x^2.
    static Estimand ols(std::size_t x_col, std::size_t y_col) {
        Estimand e(Kind::OLS);
        e.x_ = x_col;
        e.y_ = y_col;
        return e;
    }

    /// f = z*y, g = z*x.
    static Estimand iv(std::size_t z_col, std::size_t x_col, std::size_t y_col) {
        Estimand e(Kind::IV);
        e.z_ = z_col;
        e.x_ = x_col;
        e.y_ = y_col;
        return e;
    }

    static Estimand custom(RowFn f_fn, RowFn g_fn) {
        Estimand e(Kind::Custom);
        e.f_fn_ = std::move(f_fn);
        e.g_fn_ = std::move(g_fn);
        return e;
    }

    Kind kind() const { return kind_; }

    double f(std::span<const double> row) const {
        switch (kind_) {
            case Kind::Mean: return row[y_];
            case Kind::OLS: return row[x_] * row[y_];
            case Kind::IV: return row[z_] * row[y_];
            case Kind::Custom: return f_fn_(row);
        }
        return 0.0;
    }

    double g(std::span<const double> row) const {
        switch (kind_) {
            case Kind::Mean: return 1.0;
            case Kind::OLS: return row[x_] * row[x_];
            case Kind::IV: return row[z_] * row[x_];
            case Kind::Custom: return g_fn_(row);
        }
        return 0.0;
    }

    /// Largest column index the estimand reads (for input validation).
    std::size_t max_column() const {
        switch (kind_) {
            case Kind::Mean: return y_;
            case Kind::OLS: return x_ > y_ ? x_ : y_;
            case Kind::IV: {
                std::size_t m = z_ > x_ ? z_ : x_;
                return m > y_ ? m : y_;
            }
            case Kind::Custom: return 0;
        }
        return 0;
    }

private:
    explicit Estimand(Kind k) : kind_(k) {}

    Kind kind_;
    std::size_t y_ = 0, x_ = 0, z_ = 0;
    RowFn f_fn_, g_fn_;
};

} // namespace selbounds

#endif
