#include "cmest/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cmest/errors.hpp"
#include "cmest/numerics.hpp"

namespace cmest::quadrature {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfPi = 0.5 * numerics::kPi;
constexpr double kLn2 = 0.693147180559945309417232121458;
constexpr double kTMax = 6.0;
constexpr double kBaseStep = 0.5;
// Terms this far (in log units) below the largest term are dropped when
// trimming the t-range after the first level.
constexpr double kNegligibleLog = 60.0;
constexpr int kMinLevels = 3;

enum class Rule { tanh_sinh, exp_sinh_right, exp_sinh_left };

struct Piece {
  Rule rule;
  double a;  // finite endpoint (left for tanh_sinh / exp_sinh_right)
  double b;  // right endpoint for tanh_sinh / exp_sinh_left
};

double log_cosh(double u) {
  const double au = std::abs(u);
  return au + std::log1p(std::exp(-2.0 * au)) - kLn2;
}

// Abscissa and log of the transformation Jacobian for parameter t.
struct Node {
  double x;
  double log_w;
  bool valid;
};

Node make_node(const Piece& p, double t) {
  const double v = kHalfPi * std::sinh(t);
  const double log_dv = std::log(kHalfPi * std::cosh(t));
  switch (p.rule) {
    case Rule::tanh_sinh: {
      const double half = 0.5 * (p.b - p.a);
      // 1 - tanh(|v|) without cancellation.
      const double comp = 2.0 / (1.0 + std::exp(2.0 * std::abs(v)));
      const double x = v >= 0.0 ? p.b - half * comp : p.a + half * comp;
      const bool inside = x > p.a && x < p.b;
      return {x, std::log(half) + log_dv - 2.0 * log_cosh(v), inside};
    }
    case Rule::exp_sinh_right: {
      const double x = p.a + std::exp(v);
      return {x, v + log_dv, x > p.a && std::isfinite(x)};
    }
    case Rule::exp_sinh_left: {
      const double x = p.b - std::exp(v);
      return {x, v + log_dv, x < p.b && std::isfinite(x)};
    }
  }
  return {0.0, 0.0, false};
}

// Sum of exponentials carried as shift + log(sum).
class LogSum {
 public:
  void add(double log_term) {
    if (!(log_term > -kInf)) return;
    if (log_term > shift_) {
      sum_ = sum_ * std::exp(shift_ - log_term) + 1.0;
      shift_ = log_term;
    } else {
      sum_ += std::exp(log_term - shift_);
    }
  }
  double log() const { return sum_ > 0.0 ? shift_ + std::log(sum_) : -kInf; }

 private:
  double shift_ = -kInf;
  double sum_ = 0.0;
};

struct PieceResult {
  double log_value = -kInf;
  double log_error = -kInf;
  std::size_t nodes = 0;
  bool converged = false;
};

double safe_eval(const LogIntegrand& f, double x) {
  const double v = f(x);
  if (std::isnan(v) || v == kInf) return -kInf;
  return v;
}

// |exp(la) - exp(lb)| in log space.
double log_abs_diff(double la, double lb) {
  if (la == lb) return -kInf;
  return la > lb ? numerics::log_sub_exp(la, lb) : numerics::log_sub_exp(lb, la);
}

PieceResult integrate_piece(const LogIntegrand& f, const Piece& piece, double log_abs_tol,
                            double log_rel_tol, std::size_t budget) {
  PieceResult out;
  LogSum total;

  // Level 0 over the full t-range; then trim to where terms matter.
  const int k_max = static_cast<int>(kTMax / kBaseStep);
  std::vector<double> level0(2 * k_max + 1, -kInf);
  double peak = -kInf;
  for (int k = -k_max; k <= k_max; ++k) {
    const Node node = make_node(piece, k * kBaseStep);
    double lt = -kInf;
    if (node.valid) {
      lt = safe_eval(f, node.x) + node.log_w;
      ++out.nodes;
    }
    level0[k + k_max] = lt;
    peak = std::max(peak, lt);
    total.add(lt);
  }
  if (peak == -kInf) {
    out.converged = true;
    return out;
  }
  int lo_k = -k_max;
  while (lo_k < k_max && level0[lo_k + k_max] < peak - kNegligibleLog) ++lo_k;
  int hi_k = k_max;
  while (hi_k > -k_max && level0[hi_k + k_max] < peak - kNegligibleLog) --hi_k;
  const double t_lo = std::max(-kTMax, (lo_k - 1) * kBaseStep);
  const double t_hi = std::min(kTMax, (hi_k + 1) * kBaseStep);

  double h = kBaseStep;
  double log_prev = total.log() + std::log(h);
  for (int level = 1;; ++level) {
    h *= 0.5;
    const double first = std::ceil((t_lo / h - 1.0) / 2.0);
    for (double j = first;; j += 1.0) {
      const double t = (2.0 * j + 1.0) * h;
      if (t > t_hi) break;
      if (t < t_lo) continue;
      const Node node = make_node(piece, t);
      if (!node.valid) continue;
      total.add(safe_eval(f, node.x) + node.log_w);
      ++out.nodes;
    }
    const double log_cur = total.log() + std::log(h);
    const double log_err = log_abs_diff(log_cur, log_prev);
    out.log_value = log_cur;
    out.log_error = log_err;
    const double log_target = std::max(log_abs_tol, log_rel_tol + log_cur);
    if (level >= kMinLevels && log_err <= log_target) {
      out.converged = true;
      return out;
    }
    if (out.nodes * 2 > budget) return out;
    log_prev = log_cur;
  }
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Locates the maximum of the integrand on [a, b] on a uniform probe grid.
double probe_peak_finite(const LogIntegrand& f, double a, double b, std::size_t& nodes,
                         bool& interior) {
  constexpr int n = 64;
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = safe_eval(f, a + (i + 0.5) * (b - a) / n);
  nodes += n;
  const int i = argmax(vals);
  interior = i > 0 && i < n - 1 && vals[i] > -kInf;
  return a + (i + 0.5) * (b - a) / n;
}

// Peak of the integrand on the half-line a + s*d, d>0: geometric scan then a
// uniform refinement around the best scale. Returns the distance from a.
double probe_peak_half_line(const LogIntegrand& f, double a, double sign, std::size_t& nodes) {
  constexpr int j_lo = -8;
  constexpr int j_hi = 40;
  std::vector<double> vals;
  for (int j = j_lo; j <= j_hi; ++j) vals.push_back(safe_eval(f, a + sign * std::ldexp(1.0, j)));
  nodes += vals.size();
  const int best = argmax(vals);
  if (vals[best] == -kInf) return 0.0;
  const double scale = std::ldexp(1.0, best + j_lo);
  if (scale < 1.0) return 0.0;
  constexpr int n = 64;
  const double s_lo = 0.5 * scale;
  const double s_hi = 2.0 * scale;
  std::vector<double> fine(n);
  for (int i = 0; i < n; ++i) fine[i] = safe_eval(f, a + sign * (s_lo + (s_hi - s_lo) * i / (n - 1)));
  nodes += n;
  return s_lo + (s_hi - s_lo) * argmax(fine) / (n - 1);
}

std::vector<Piece> plan(const LogIntegrand& f, double lo, double hi, std::size_t& nodes) {
  const bool lo_fin = std::isfinite(lo);
  const bool hi_fin = std::isfinite(hi);
  if (lo_fin && hi_fin) {
    bool interior = false;
    const double p = probe_peak_finite(f, lo, hi, nodes, interior);
    if (interior) return {{Rule::tanh_sinh, lo, p}, {Rule::tanh_sinh, p, hi}};
    return {{Rule::tanh_sinh, lo, hi}};
  }
  if (lo_fin) {
    const double d = probe_peak_half_line(f, lo, 1.0, nodes);
    if (d > 0.0) return {{Rule::tanh_sinh, lo, lo + d}, {Rule::exp_sinh_right, lo + d, kInf}};
    return {{Rule::exp_sinh_right, lo, kInf}};
  }
  if (hi_fin) {
    const double d = probe_peak_half_line(f, hi, -1.0, nodes);
    if (d > 0.0) return {{Rule::exp_sinh_left, -kInf, hi - d}, {Rule::tanh_sinh, hi - d, hi}};
    return {{Rule::exp_sinh_left, -kInf, hi}};
  }
  // Whole line: cut at the probed maximum, then treat each half-line.
  std::vector<double> xs{0.0};
  for (int j = -8; j <= 40; ++j) {
    xs.push_back(std::ldexp(1.0, j));
    xs.push_back(-std::ldexp(1.0, j));
  }
  std::vector<double> vals(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) vals[i] = safe_eval(f, xs[i]);
  nodes += xs.size();
  const double c = xs[argmax(vals)];
  auto left = plan(f, -kInf, c, nodes);
  auto right = plan(f, c, kInf, nodes);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

}  // namespace

QuadResult integrate(const LogIntegrand& log_f, double lo, double hi, Tolerance tol,
                     std::size_t max_nodes) {
  if (std::isnan(lo) || std::isnan(hi)) throw DomainError("integrate: NaN interval bound");
  if (!(tol.abs > 0.0 || tol.rel > 0.0)) throw DomainError("integrate: tolerance must be positive");
  QuadResult result;
  if (!(lo < hi)) {
    if (lo == hi) {
      result.converged = true;
      result.log_value = -kInf;
      return result;
    }
    throw DomainError("integrate: lower bound exceeds upper bound");
  }

  std::size_t nodes = 0;
  const auto pieces = plan(log_f, lo, hi, nodes);
  const double per_piece = static_cast<double>(pieces.size());
  const double log_abs_tol = tol.abs > 0.0 ? std::log(tol.abs / per_piece) : -kInf;
  const double log_rel_tol = tol.rel > 0.0 ? std::log(tol.rel) : -kInf;

  LogSum value;
  LogSum error;
  bool converged = true;
  for (const auto& piece : pieces) {
    const auto r = integrate_piece(log_f, piece, log_abs_tol, log_rel_tol,
                                   max_nodes > nodes ? (max_nodes - nodes) / pieces.size() : 0);
    nodes += r.nodes;
    value.add(r.log_value);
    error.add(r.log_error);
    converged = converged && r.converged;
  }
  result.log_value = value.log();
  result.value = std::exp(result.log_value);
  result.abs_error_bound = std::exp(error.log());
  result.nodes_used = nodes;
  // Pieces converge against their own share of the tolerance; the total may
  // still meet it when one piece fell short.
  if (!converged) {
    const double log_abs = tol.abs > 0.0 ? std::log(tol.abs) : -kInf;
    converged = error.log() <= std::max(log_abs, log_rel_tol + result.log_value);
  }
  result.converged = converged;
  return result;
}

}  // namespace cmest::quadrature
