#ifndef SELBOUNDS_INFERENCE_HPP
#define SELBOUNDS_INFERENCE_HPP

#include <cstddef>
#include <span>

#include "selbounds/lfp.hpp"
#include "selbounds/support.hpp"

namespace selbounds {

/// Two-sided confidence interval for the identified interval: the point
/// interval widened by normal-quantile standard-error margins on each side.
struct AsymptoticCI {
    double c_lo = 0.0;
    double c_hi = 0.0;
    double alpha = 0.0;
    double se_lo = 0.0; // standard error of the lower endpoint, sigma_hat/sqrt(n)
    double se_hi = 0.0;
    std::size_t n = 0;

    bool contains(double x) const { return x >= c_lo && x <= c_hi; }
    bool covers(double lo, double hi) const { return c_lo <= lo && c_hi >= hi; }
    double width() const { return c_hi - c_lo; }
};

/// Delta-method variance of the ratio estimator at fixed weights:
///   sigma^2(w) = sum_k phat_k [w_k (f_k - beta g_k)]^2 / (sum_k phat_k w_k g_k)^2
/// where beta = beta_w. Returns the variance of sqrt(n) (beta_hat(w) - beta(w)).
double sigma_hat_sq(const SupportTable& table, std::span<const double> w, double beta_w);

/// Square root of sigma_hat_sq.
double sigma_hat(const SupportTable& table, std::span<const double> w, double beta_w);

/// CI at significance alpha around an estimated interval, using the variance
/// estimate at each optimizing weight vector.
AsymptoticCI confidence_interval(const IntervalEstimate& ie, const SupportTable& table,
                                 double alpha);

/// p-value for the hypothesis that beta_tilde lies in the identified
/// interval: Phi((beta_hi - bt)/se_hi) - Phi((beta_lo - bt)/se_lo), clamped
/// to [0, 1]. With both standard errors zero this degenerates to the
/// indicator of bt in [beta_lo, beta_hi].
double p_value(const IntervalEstimate& ie, const SupportTable& table, double beta_tilde);

/// Same p-value from precomputed endpoint standard errors.
double p_value_from_se(double beta_lo, double beta_hi, double se_lo, double se_hi,
                       double beta_tilde);

} // namespace selbounds

#endif
