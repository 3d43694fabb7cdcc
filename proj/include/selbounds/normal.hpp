#ifndef SELBOUNDS_NORMAL_HPP
#define SELBOUNDS_NORMAL_HPP

namespace selbounds {

/// Standard normal CDF, computed through the complementary error function.
double norm_cdf(double x);

/// Standard normal quantile Phi^{-1}(p), 0 < p < 1.
/// Rational approximation (Wichura's PPND16), relative error below 1e-15.
double norm_quantile(double p);

/// Upper a-quantile Z_a: P(Z > Z_a) = a.
double upper_quantile(double a);

} // namespace selbounds

#endif
