#pragma once

// Special functions shared by the models, estimators and verification code.
//
// Everything here is a pure function of its arguments and safe to call from
// any thread.

namespace cmest::numerics {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
/// log(sqrt(2*pi))
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736405617639;
/// sqrt(pi/2), the Mills ratio at zero.
inline constexpr double kSqrtHalfPi = 1.25331413731550025120788264240552263;

double std_normal_pdf(double x);
double std_normal_log_pdf(double x);
double std_normal_cdf(double x);
/// Survival function 1 - Phi(x), accurate in the upper tail.
double std_normal_sf(double x);
double std_normal_log_cdf(double x);
double std_normal_log_sf(double x);

/// Inverse of the standard normal CDF (Wichura's AS 241), p in (0, 1).
double std_normal_quantile(double p);

/// Mills ratio R(x) = (1 - Phi(x)) / phi(x).
///
/// Uses erfc for x < 5 and the Laplace continued fraction
/// R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))) for x >= 5, so that the ratio
/// stays accurate long after both numerator and denominator underflow.
/// Overflows to +inf for x below about -37.5, where the true value exceeds
/// the double range; use log_mills_ratio there.
double mills_ratio(double x);
double log_mills_ratio(double x);

/// 1 - x R(x), the normal-model estimator of theta^-2 at unit scale. For
/// x >= 5 it is taken from the tail of the same continued fraction, which
/// avoids the cancellation of the direct formula.
double mills_ratio_complement(double x);
double log_mills_ratio_complement(double x);

/// log(Phi(b) - Phi(a)) for a < b, accurate in both tails.
double std_normal_log_interval_mass(double a, double b);

/// log Gamma(a) for a > 0 (Lanczos, g = 7). Reentrant, unlike std::lgamma
/// which writes the global signgam on glibc.
double log_gamma(double a);

/// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x),
/// a > 0, x >= 0.
double lower_incomplete_gamma_regularized(double a, double x);
double upper_incomplete_gamma_regularized(double a, double x);
double log_upper_incomplete_gamma_regularized(double a, double x);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);
/// log(exp(a) - exp(b)) for a >= b.
double log_sub_exp(double a, double b);

}  // namespace cmest::numerics
