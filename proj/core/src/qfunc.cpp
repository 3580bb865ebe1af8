#include "cmest/qfunc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cmest/errors.hpp"
#include "cmest/format.hpp"
#include "cmest/numerics.hpp"
#include "descriptor.hpp"

namespace cmest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

QFunction parse_single(std::string_view text) {
  const auto parts = detail::split_descriptor(text);
  detail::ParamReader reader(parts);
  const std::string& head = parts.head;
  auto positive = [](const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ParseError("key '" + key + "' must be positive and finite, got " + format_number(v), key);
    }
    return v;
  };
  if (head == "recip") {
    reader.finish();
    return qfunc::reciprocal();
  }
  if (head == "power") {
    const double k = positive("k", reader.require("k"));
    reader.finish();
    return qfunc::power(k);
  }
  if (head == "shiftpow") {
    const double b = reader.require("b");
    if (!std::isfinite(b)) throw ParseError("key 'b' must be finite", "b");
    const double k = positive("k", reader.require("k"));
    reader.finish();
    return qfunc::shifted_power(b, k);
  }
  if (head == "window") {
    const double d1 = reader.require("d1");
    const double d2 = reader.require("d2");
    reader.finish();
    if (!(d1 >= 0.0) || !std::isfinite(d1)) throw ParseError("key 'd1' must be finite and >= 0", "d1");
    if (!(d2 > d1)) throw ParseError("key 'd2' must exceed d1", "d2");
    return qfunc::window(d1, d2);
  }
  throw ParseError("unknown q kind '" + head + "' (expected recip, power, shiftpow, window)", head);
}

}  // namespace

namespace qfunc {

QFunction reciprocal() {
  QFunction q;
  q.name = "recip";
  q.kind = QKind::reciprocal;
  q.log_f = [](double) { return 0.0; };
  q.domain = {0.0, kInf};
  q.closed_q = [](double theta) { return 1.0 / theta; };
  return q;
}

QFunction power(double k) {
  require(k > 0.0 && std::isfinite(k), "power: k must be positive and finite");
  if (k == 1.0) {
    QFunction q = reciprocal();
    q.name = "power:k=1";
    q.kind = QKind::power;
    return q;
  }
  QFunction q;
  q.name = "power:k=" + format_number(k);
  q.kind = QKind::power;
  q.k = k;
  const double lg = numerics::log_gamma(k);
  q.log_f = [k, lg](double y) { return (k - 1.0) * std::log(y) - lg; };
  q.domain = {0.0, kInf};
  q.closed_q = [k](double theta) { return std::pow(theta, -k); };
  return q;
}

QFunction shifted_power(double b, double k) {
  require(k > 0.0 && std::isfinite(k), "shiftpow: k must be positive and finite");
  require(std::isfinite(b), "shiftpow: b must be finite");
  QFunction q;
  q.name = "shiftpow:b=" + format_number(b) + ",k=" + format_number(k);
  q.kind = QKind::shifted_power;
  q.k = k;
  q.b = b;
  const double lg = numerics::log_gamma(k);
  q.log_f = [k, b, lg](double y) { return (k - 1.0) * std::log(y) - b * y - lg; };
  q.domain = {-b, kInf};
  q.closed_q = [k, b](double theta) { return std::pow(b + theta, -k); };
  return q;
}

QFunction window(double d1, double d2) {
  require(d1 >= 0.0 && std::isfinite(d1), "window: d1 must be finite and >= 0");
  require(d2 > d1, "window: need d1 < d2 (d1 = d2 gives the zero function)");
  QFunction q;
  q.name = "window:d1=" + format_number(d1) + ",d2=" + format_number(d2);
  q.kind = QKind::window;
  q.d1 = d1;
  q.d2 = d2;
  q.log_f = [d1, d2](double y) { return y > d1 && y < d2 ? 0.0 : -kInf; };
  q.f_support = {d1, d2};
  q.domain = std::isinf(d2) ? Interval{0.0, kInf} : Interval{-kInf, kInf};
  q.closed_q = [d1, d2](double theta) {
    if (std::isinf(d2)) return std::exp(-d1 * theta) / theta;
    if (theta == 0.0) return d2 - d1;
    // e^{-d1 t} (1 - e^{-(d2-d1) t}) / t
    return std::exp(-d1 * theta) * -std::expm1(-(d2 - d1) * theta) / theta;
  };
  return q;
}

QFunction mixture(std::vector<std::pair<double, QFunction>> terms) {
  require(!terms.empty(), "mixture: needs at least one term");
  QFunction q;
  q.kind = QKind::mixture;
  q.domain = {-kInf, kInf};
  bool all_closed = true;
  for (const auto& [w, c] : terms) {
    require(std::isfinite(w) && w != 0.0, "mixture: weights must be finite and nonzero");
    if (!q.name.empty()) q.name += "+";
    q.name += (w == 1.0 ? "" : format_number(w) + "*") + c.name;
    q.domain = intersect(q.domain, c.domain);
    q.nonnegative = q.nonnegative && w > 0.0 && c.nonnegative;
    all_closed = all_closed && static_cast<bool>(c.closed_q);
  }
  require(q.domain.lo < q.domain.hi, "mixture: component domains do not overlap");
  q.components = std::move(terms);
  if (all_closed) {
    q.closed_q = [parts = q.components](double theta) {
      double s = 0.0;
      for (const auto& [w, c] : parts) s += w * c.closed_q(theta);
      return s;
    };
  }
  return q;
}

QFunction custom(std::string name, std::function<double(double)> log_f, Interval domain,
                 std::function<double(double)> closed_q) {
  require(static_cast<bool>(log_f), "custom q: log_f must be callable");
  require(domain.lo < domain.hi, "custom q: empty domain");
  QFunction q;
  q.name = std::move(name);
  q.kind = QKind::custom;
  q.log_f = std::move(log_f);
  q.domain = domain;
  q.closed_q = std::move(closed_q);
  return q;
}

QFunction builtin(std::string_view kind, double p1, double p2) {
  if (kind == "recip" || kind == "reciprocal") return reciprocal();
  if (kind == "power") return power(p1);
  if (kind == "shiftpow" || kind == "shifted_power") return shifted_power(p1, p2);
  if (kind == "window") return window(p1, p2);
  throw DomainError("unknown q kind '" + std::string(kind) + "'");
}

QFunction parse_q(std::string_view descriptor) {
  descriptor = trim(descriptor);
  if (descriptor.starts_with("q=")) descriptor.remove_prefix(2);
  if (descriptor.empty()) throw ParseError("empty q descriptor", "q");
  std::vector<std::pair<double, QFunction>> terms;
  std::string_view rest = descriptor;
  while (true) {
    const auto plus = rest.find('+');
    std::string_view item = trim(rest.substr(0, plus));
    double w = 1.0;
    const auto star = item.find('*');
    if (star != std::string_view::npos) {
      w = detail::parse_number(item.substr(0, star), "weight");
      item = trim(item.substr(star + 1));
    }
    terms.emplace_back(w, parse_single(item));
    if (plus == std::string_view::npos) break;
    rest = rest.substr(plus + 1);
  }
  if (terms.size() == 1 && terms.front().first == 1.0) return std::move(terms.front().second);
  try {
    return mixture(std::move(terms));
  } catch (const DomainError& e) {
    throw ParseError(e.what(), "weight");
  }
}

}  // namespace qfunc

double eval_q(const QFunction& q, double theta) {
  if (!q.domain.contains(theta)) {
    throw DomainError(q.name + ": theta=" + format_number(theta) + " outside C = (" + format_number(q.domain.lo) +
                      ", " + format_number(q.domain.hi) + ")");
  }
  if (q.closed_q) return q.closed_q(theta);
  return eval_q_quadrature(q, theta).value;
}

quadrature::QuadResult eval_q_quadrature(const QFunction& q, double theta) {
  if (!q.domain.contains(theta)) {
    throw DomainError(q.name + ": theta=" + format_number(theta) + " outside C");
  }
  constexpr quadrature::Tolerance tol{1e-10, 1e-14};
  if (q.kind == QKind::mixture) {
    quadrature::QuadResult total;
    total.converged = true;
    for (const auto& [w, c] : q.components) {
      const auto r = eval_q_quadrature(c, theta);
      total.value += w * r.value;
      total.abs_error_bound += std::abs(w) * r.abs_error_bound;
      total.nodes_used += r.nodes_used;
    }
    total.log_value = std::log(std::abs(total.value));
    return total;
  }
  auto integrand = [&](double y) { return q.log_f(y) - y * theta; };
  // Split where the integrand of the power kinds peaks, (k-1)/rate, and hand
  // the tail to the half-line rule.
  const double rate = q.kind == QKind::shifted_power ? theta + q.b : theta;
  double split = std::max(1.0, rate > 0.0 ? q.k / rate : 1.0);
  const double lo = q.f_support.lo;
  const double hi = q.f_support.hi;
  if (q.kind == QKind::window) split = std::isinf(hi) ? lo + std::max(1.0, 1.0 / std::max(theta, 1e-300)) : hi;
  split = std::clamp(split, lo, hi);

  auto first = quadrature::integrate(integrand, lo, split, tol);
  quadrature::QuadResult out = first;
  if (split < hi) {
    const auto second = quadrature::integrate(integrand, split, hi, tol);
    out.log_value = numerics::log_add_exp(first.log_value, second.log_value);
    out.value = std::exp(out.log_value);
    out.abs_error_bound = first.abs_error_bound + second.abs_error_bound;
    out.nodes_used += second.nodes_used;
    out.converged = first.converged && second.converged;
  }
  if (!out.converged) {
    throw ConvergenceError(q.name + ": Laplace integral did not converge at theta=" + format_number(theta),
                           out.abs_error_bound);
  }
  return out;
}

MonotonicityCheck check_complete_monotonicity(const QFunction& q, const std::vector<double>& grid,
                                              int max_order) {
  if (max_order < 1) throw DomainError("monotonicity check: max_order must be >= 1");
  MonotonicityCheck out;
  for (double theta : grid) {
    if (!q.domain.contains(theta)) {
      throw DomainError(q.name + ": grid point " + format_number(theta) + " outside C");
    }
    double h = 1e-2 * std::max(1.0, std::abs(theta));
    if (std::isfinite(q.domain.lo)) h = std::min(h, 0.25 * (theta - q.domain.lo));
    if (std::isfinite(q.domain.hi)) h = std::min(h, 0.25 * (q.domain.hi - theta));
    for (int m = 1; m <= max_order; ++m) {
      // Delta_h^m q(theta) = sum_j (-1)^j C(m, j) q(theta + (m/2 - j) h)
      double diff = 0.0;
      double scale = 0.0;
      double binom = 1.0;
      for (int j = 0; j <= m; ++j) {
        const double v = eval_q(q, theta + (0.5 * m - j) * h);
        diff += (j % 2 == 0 ? 1.0 : -1.0) * binom * v;
        scale = std::max(scale, std::abs(v));
        binom = binom * (m - j) / (j + 1);
      }
      const double signed_diff = (m % 2 == 0 ? 1.0 : -1.0) * diff;
      const bool ok = signed_diff >= -1e-6 * scale;
      out.entries.push_back({theta, m, signed_diff, scale, ok});
      out.ok = out.ok && ok;
    }
  }
  return out;
}

}  // namespace cmest
