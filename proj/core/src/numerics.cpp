#include "cmest/numerics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "cmest/errors.hpp"

namespace cmest::numerics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;

// Laplace continued fraction x + m/(x + (m+1)/(x + (m+2)/(x + ...))),
// evaluated with the modified Lentz method. m = 1 gives 1/R(x). Only used for
// x >= 5, where it converges in well under 100 terms.
double laplace_continued_fraction(double x, int m) {
  double f = x;
  double c = x;
  double d = 0.0;
  for (int n = m; n < m + 500; ++n) {
    d = x + n * d;
    if (d == 0.0) d = kTiny;
    c = x + n / c;
    if (c == 0.0) c = kTiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 0.5 * kEps) break;
  }
  return f;
}

double mills_continued_fraction(double x) { return 1.0 / laplace_continued_fraction(x, 1); }

template <std::size_t N>
double polyval(const std::array<double, N>& coeffs, double x) {
  double acc = coeffs[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + coeffs[i];
  return acc;
}

// Series for P(a, x); converges for x < a + 1.
double gamma_series(double a, double x, double log_prefactor) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) {
      return sum * std::exp(log_prefactor);
    }
  }
  throw ConvergenceError("incomplete gamma series did not converge", std::abs(term / sum));
}

// log of the continued fraction part of Q(a, x); for x >= a + 1.
double log_gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return std::log(h);
  }
  throw ConvergenceError("incomplete gamma continued fraction did not converge", 0.0);
}

void check_incomplete_gamma_args(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError("incomplete gamma: shape must be positive, got " + std::to_string(a));
  }
  if (!(x >= 0.0)) {
    throw DomainError("incomplete gamma: argument must be >= 0, got " + std::to_string(x));
  }
}

}  // namespace

double std_normal_pdf(double x) { return std::exp(std_normal_log_pdf(x)); }

double std_normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double std_normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double std_normal_log_sf(double x) {
  if (x < -1.0) return std::log1p(-std_normal_cdf(x));
  if (x < 5.0) return std::log(std_normal_sf(x));
  return log_mills_ratio(x) + std_normal_log_pdf(x);
}

double std_normal_log_cdf(double x) { return std_normal_log_sf(-x); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw DomainError("normal quantile: p must lie in [0, 1], got " + std::to_string(p));
  }
  static constexpr std::array<double, 8> a = {
      3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
      1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr std::array<double, 8> b = {
      1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
      5.2264952788528545610e+3};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr std::array<double, 8> d = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * polyval(a, r) / polyval(b, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = polyval(c, r) / polyval(d, r);
  } else {
    r -= 5.0;
    x = polyval(e, r) / polyval(f, r);
  }
  return q < 0.0 ? -x : x;
}

double mills_ratio(double x) {
  if (std::isnan(x)) return x;
  if (x >= 5.0) return mills_continued_fraction(x);
  if (x > -5.0) return std_normal_sf(x) * std::exp(-std_normal_log_pdf(x));
  return std::exp(log_mills_ratio(x));
}

double log_mills_ratio(double x) {
  if (std::isnan(x)) return x;
  if (x >= 5.0) return std::log(mills_continued_fraction(x));
  if (x > -5.0) return std::log(mills_ratio(x));
  // Lower tail: 1 - Phi(x) is within a hair of one, phi(x) is tiny.
  return std::log1p(-std_normal_cdf(x)) - std_normal_log_pdf(x);
}

double mills_ratio_complement(double x) {
  if (std::isnan(x)) return x;
  // R = 1/(x + t^{-1}) with t = 1/(x + 2/(x + 3/...)), so 1 - xR = tR.
  if (x >= 5.0) return mills_continued_fraction(x) / laplace_continued_fraction(x, 2);
  if (x > -5.0) return 1.0 - x * mills_ratio(x);
  return std::exp(log_mills_ratio_complement(x));
}

double log_mills_ratio_complement(double x) {
  if (std::isnan(x)) return x;
  if (x >= 5.0) return log_mills_ratio(x) - std::log(laplace_continued_fraction(x, 2));
  if (x >= 0.0) return std::log(mills_ratio_complement(x));
  return log_add_exp(0.0, std::log(-x) + log_mills_ratio(x));
}

double std_normal_log_interval_mass(double a, double b) {
  if (!(a < b)) return -kInf;
  if (b <= 0.0) return log_sub_exp(std_normal_log_cdf(b), std_normal_log_cdf(a));
  if (a >= 0.0) return log_sub_exp(std_normal_log_sf(a), std_normal_log_sf(b));
  return std::log(std_normal_cdf(b) - std_normal_cdf(a));
}

double log_gamma(double a) {
  if (!(a > 0.0)) throw DomainError("log_gamma: argument must be positive, got " + std::to_string(a));
  if (std::isinf(a)) return kInf;
  if (a < 0.5) {
    // Reflection: Gamma(a) Gamma(1 - a) = pi / sin(pi a).
    return std::log(kPi / std::sin(kPi * a)) - log_gamma(1.0 - a);
  }
  if (a == 1.0 || a == 2.0) return 0.0;
  static constexpr std::array<double, 9> coeffs = {
      0.99999999999980993, 676.5203681218851, -1259.1392167224028,
      771.32342877765313, -176.61502916214059, 12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double g = 7.0;
  const double z = a - 1.0;
  double series = coeffs[0];
  for (std::size_t i = 1; i < coeffs.size(); ++i) series += coeffs[i] / (z + static_cast<double>(i));
  const double t = z + g + 0.5;
  return kLogSqrt2Pi + (z + 0.5) * std::log(t) - t + std::log(series);
}

double lower_incomplete_gamma_regularized(double a, double x) {
  check_incomplete_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefactor = a * std::log(x) - x - log_gamma(a);
  if (x < a + 1.0) return gamma_series(a, x, log_prefactor);
  return -std::expm1(log_prefactor + log_gamma_continued_fraction(a, x));
}

double upper_incomplete_gamma_regularized(double a, double x) {
  check_incomplete_gamma_args(a, x);
  return std::exp(log_upper_incomplete_gamma_regularized(a, x));
}

double log_upper_incomplete_gamma_regularized(double a, double x) {
  check_incomplete_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return -kInf;
  const double log_prefactor = a * std::log(x) - x - log_gamma(a);
  if (x < a + 1.0) return std::log1p(-gamma_series(a, x, log_prefactor));
  return log_prefactor + log_gamma_continued_fraction(a, x);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_sub_exp(double a, double b) {
  if (b > a) throw DomainError("log_sub_exp: second argument exceeds the first");
  if (b == -kInf) return a;
  if (a == b) return -kInf;
  const double d = b - a;
  return a + (d > -0.693 ? std::log(-std::expm1(d)) : std::log1p(-std::exp(d)));
}

}  // namespace cmest::numerics
