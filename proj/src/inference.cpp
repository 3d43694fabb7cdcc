#include "selbounds/inference.hpp"

#include <algorithm>
#include <cmath>

#include "selbounds/normal.hpp"

namespace selbounds {

double sigma_hat_sq(const SupportTable& table, std::span<const double> w, double beta_w) {
    const std::size_t k = table.num_cells();
    if (w.size() != k)
        throw InvalidParameter("weight vector length does not match cell count");
    double num = 0.0, den = 0.0, den_mag = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double resid = w[i] * (table.f[i] - beta_w * table.g[i]);
        num += table.phat[i] * resid * resid;
        const double term = table.phat[i] * w[i] * table.g[i];
        den += term;
        den_mag += std::fabs(term);
    }
    if (den == 0.0 || std::fabs(den) < 1e-13 * den_mag)
        throw ZeroDenominator("weighted denominator vanishes in the variance estimate");
    return num / (den * den);
}

double sigma_hat(const SupportTable& table, std::span<const double> w, double beta_w) {
    return std::sqrt(sigma_hat_sq(table, w, beta_w));
}

AsymptoticCI confidence_interval(const IntervalEstimate& ie, const SupportTable& table,
                                 double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidParameter("confidence level alpha must lie in (0, 1)");
    const double root_n = std::sqrt(static_cast<double>(table.n));
    AsymptoticCI ci;
    ci.alpha = alpha;
    ci.n = table.n;
    ci.se_lo = sigma_hat(table, ie.w_lo, ie.beta_lo) / root_n;
    ci.se_hi = sigma_hat(table, ie.w_hi, ie.beta_hi) / root_n;
    const double z = upper_quantile(alpha / 2.0);
    ci.c_lo = ie.beta_lo - z * ci.se_lo;
    ci.c_hi = ie.beta_hi + z * ci.se_hi;
    return ci;
}

namespace {

// Phi((b - bt)/se) with the se = 0 limit as a step function.
double cdf_term(double b, double bt, double se) {
    if (se > 0.0) return norm_cdf((b - bt) / se);
    if (b > bt) return 1.0;
    if (b < bt) return 0.0;
    return 0.5;
}

} // namespace

double p_value_from_se(double beta_lo, double beta_hi, double se_lo, double se_hi,
                       double beta_tilde) {
    if (se_lo == 0.0 && se_hi == 0.0)
        return (beta_tilde >= beta_lo && beta_tilde <= beta_hi) ? 1.0 : 0.0;
    const double p = cdf_term(beta_hi, beta_tilde, se_hi) - cdf_term(beta_lo, beta_tilde, se_lo);
    return std::clamp(p, 0.0, 1.0);
}

double p_value(const IntervalEstimate& ie, const SupportTable& table, double beta_tilde) {
    const double root_n = std::sqrt(static_cast<double>(table.n));
    const double se_lo = sigma_hat(table, ie.w_lo, ie.beta_lo) / root_n;
    const double se_hi = sigma_hat(table, ie.w_hi, ie.beta_hi) / root_n;
    return p_value_from_se(ie.beta_lo, ie.beta_hi, se_lo, se_hi, beta_tilde);
}

} // namespace selbounds
