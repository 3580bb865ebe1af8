#pragma once

// Reference computations for the tests. Deliberately naive and independent
// of the library: long double throughout, Gauss-Legendre panels with plain
// bisection, std::erfc / std::lgamma for special functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace oracle {

using Real = long double;
using Fn = std::function<Real(Real)>;

inline constexpr int kNodes = 20;

struct Rule {
  std::array<Real, kNodes> x{};
  std::array<Real, kNodes> w{};
};

// Legendre roots by Newton from the Chebyshev guesses.
inline const Rule& rule() {
  static const Rule r = [] {
    Rule out;
    for (int i = 0; i < kNodes; ++i) {
      Real z = std::cos(std::numbers::pi_v<Real> * (i + 0.75L) / (kNodes + 0.5L));
      Real dp = 0;
      for (int it = 0; it < 100; ++it) {
        Real p0 = 1, p1 = z;
        for (int k = 2; k <= kNodes; ++k) {
          const Real p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = kNodes * (z * p1 - p0) / (z * z - 1);
        const Real dz = p1 / dp;
        z -= dz;
        if (std::fabs(dz) < 1e-19L) break;
      }
      out.x[i] = z;
      out.w[i] = 2 / ((1 - z * z) * dp * dp);
    }
    return out;
  }();
  return r;
}

inline Real panel(const Fn& f, Real a, Real b) {
  const Rule& r = rule();
  const Real c = (a + b) / 2, h = (b - a) / 2;
  Real s = 0;
  for (int i = 0; i < kNodes; ++i) s += r.w[i] * f(c + h * r.x[i]);
  return s * h;
}

inline Real adapt(const Fn& f, Real a, Real b, Real whole, Real tol, int depth) {
  const Real m = (a + b) / 2;
  const Real left = panel(f, a, m), right = panel(f, m, b);
  const Real sum = left + right;
  const Real noise = 64 * std::numeric_limits<Real>::epsilon() * std::fabs(sum);
  if (depth <= 0 || !std::isfinite(sum) || std::fabs(sum - whole) <= std::max(tol, noise)) return sum;
  return adapt(f, a, m, left, tol / 2, depth - 1) + adapt(f, m, b, right, tol / 2, depth - 1);
}

/// Integral of f over the finite (a, b).
inline Real integrate(const Fn& f, Real a, Real b, Real tol = 1e-14L) {
  return adapt(f, a, b, panel(f, a, b), tol, 30);
}

/// Integral over (a, inf) via x = a + scale * t/(1-t).
inline Real integrate_up(const Fn& f, Real a, Real scale = 1, Real tol = 1e-14L) {
  const Fn g = [&](Real t) {
    const Real u = 1 - t;
    return f(a + scale * t / u) * scale / (u * u);
  };
  return integrate(g, 0, 1, tol);
}

/// Integral over (-inf, b).
inline Real integrate_down(const Fn& f, Real b, Real scale = 1, Real tol = 1e-14L) {
  return integrate_up([&](Real x) { return f(-x); }, -b, scale, tol);
}

inline Real integrate_line(const Fn& f, Real centre, Real scale = 1, Real tol = 1e-14L) {
  return integrate_down(f, centre, scale, tol / 2) + integrate_up(f, centre, scale, tol / 2);
}

inline Real normal_pdf(Real x) { return std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi_v<Real>); }
inline Real normal_sf(Real x) { return std::erfc(x / std::numbers::sqrt2_v<Real>) / 2; }
inline Real normal_cdf(Real x) { return normal_sf(-x); }
inline Real mills(Real x) { return normal_sf(x) / normal_pdf(x); }

/// IG(mu, lambda) distribution function.
inline Real invgauss_cdf(Real x, Real mu, Real lambda) {
  const Real r = std::sqrt(lambda / x);
  return normal_cdf(r * (x / mu - 1)) + std::exp(2 * lambda / mu) * normal_cdf(-r * (x / mu + 1));
}

/// Smallest x with cdf(x) >= p by bisection on (lo, hi).
inline Real quantile(const Fn& cdf, Real p, Real lo, Real hi) {
  for (int i = 0; i < 200; ++i) {
    const Real m = (lo + hi) / 2;
    (cdf(m) < p ? lo : hi) = m;
  }
  return (lo + hi) / 2;
}

}  // namespace oracle
