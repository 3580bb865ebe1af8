#pragma once

#include <cstddef>
#include <functional>

namespace cmest::quadrature {

/// Convergence is declared once the error estimate is at most
/// max(abs, rel * |value|).
struct Tolerance {
  double abs = 1e-10;
  double rel = 0.0;
};

struct QuadResult {
  double value = 0.0;
  double abs_error_bound = 0.0;
  std::size_t nodes_used = 0;
  bool converged = false;
  /// log(value), finite even when value itself over- or underflows.
  double log_value = 0.0;
};

/// Integrand given as its logarithm; exp(log_f(x)) must be >= 0 and
/// log_f may return -inf where the integrand vanishes.
using LogIntegrand = std::function<double(double)>;

inline constexpr std::size_t kDefaultMaxNodes = std::size_t{1} << 15;

/// Integrates exp(log_f) over (lo, hi); either bound may be infinite.
///
/// Double-exponential rules: tanh-sinh on finite pieces, exp-sinh on
/// half-lines. The range is split at the location of a probed interior
/// maximum so each piece has its mass next to an endpoint. Sums are carried
/// in log space so integrals far outside the double range keep an accurate
/// log_value. Never throws on non-convergence; converged is false and the
/// best error estimate is reported instead.
QuadResult integrate(const LogIntegrand& log_f, double lo, double hi, Tolerance tol = {},
                     std::size_t max_nodes = kDefaultMaxNodes);

}  // namespace cmest::quadrature
