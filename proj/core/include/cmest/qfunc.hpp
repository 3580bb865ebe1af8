#pragma once

// Completely monotone targets q(theta) = int_0^inf f(y) exp(-y theta) dy,
// represented by their Laplace density f.

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmest/models.hpp"
#include "cmest/quadrature.hpp"

namespace cmest {

enum class QKind { reciprocal, power, shifted_power, window, mixture, custom };

struct QFunction {
  std::string name;
  QKind kind = QKind::custom;
  /// power / shifted_power exponent k.
  double k = 1.0;
  /// shifted_power shift b.
  double b = 0.0;
  /// window bounds d1 < d2 (d2 may be inf).
  double d1 = 0.0;
  double d2 = 0.0;
  /// log f(y); -inf where f vanishes. Empty for mixtures.
  std::function<double(double)> log_f;
  /// Where f can be nonzero.
  Interval f_support{0.0, std::numeric_limits<double>::infinity()};
  /// C = {theta : |q(theta)| < inf}.
  Interval domain;
  /// Closed-form q; empty when none is known.
  std::function<double(double)> closed_q;
  /// f >= 0 everywhere, hence q completely monotone.
  bool nonnegative = true;
  /// Components of a mixture sum_i w_i q_i.
  std::vector<std::pair<double, QFunction>> components;
};

namespace qfunc {

/// f = 1, q = 1/theta on (0, inf).
QFunction reciprocal();
/// f(y) = y^(k-1)/Gamma(k), q = theta^(-k) on (0, inf).
QFunction power(double k);
/// f(y) = y^(k-1) e^(-b y)/Gamma(k), q = (b + theta)^(-k) on (-b, inf).
QFunction shifted_power(double b, double k);
/// f = 1 on (d1, d2), q = (e^(-d1 theta) - e^(-d2 theta))/theta.
/// Rejects d1 >= d2 (a zero target).
QFunction window(double d1, double d2);
/// sum_i w_i q_i. Weights may be negative; the result is then flagged as
/// not completely monotone.
QFunction mixture(std::vector<std::pair<double, QFunction>> terms);
/// Arbitrary nonnegative Laplace density given by its log. The caller
/// guarantees integrability on `domain`.
QFunction custom(std::string name, std::function<double(double)> log_f, Interval domain,
                 std::function<double(double)> closed_q = {});

/// Builtin by kind name: "recip", "power", "shiftpow", "window" with the
/// matching parameters (k; b, k; d1, d2).
QFunction builtin(std::string_view kind, double p1 = 0.0, double p2 = 0.0);

/// Grammar: `recip`, `power:k=<v>`, `shiftpow:b=<v>,k=<v>`,
/// `window:d1=<v>,d2=<v>` (d2=inf allowed), an optional `q=` prefix, and
/// `+`-joined weighted sums such as `0.5*recip+2*power:k=2`.
QFunction parse_q(std::string_view descriptor);

}  // namespace qfunc

/// q(theta): the closed form when available, otherwise quadrature.
double eval_q(const QFunction& q, double theta);

/// q(theta) by quadrature of the Laplace integral only, absolute tolerance
/// 1e-10. Throws ConvergenceError carrying the achieved bound.
quadrature::QuadResult eval_q_quadrature(const QFunction& q, double theta);

struct MonotonicityCheck {
  struct Entry {
    double theta;
    int order;
    /// (-1)^m Delta_h^m q(theta)
    double signed_difference;
    /// Largest |q| on the stencil; the check allows -1e-6 * scale.
    double scale;
    bool ok;
  };
  std::vector<Entry> entries;
  bool ok = true;
};

/// Central finite-difference sign test of (-1)^m q^(m) >= 0 for
/// m = 1..max_order on the given grid (points must lie in C).
MonotonicityCheck check_complete_monotonicity(const QFunction& q, const std::vector<double>& grid,
                                              int max_order = 3);

}  // namespace cmest
