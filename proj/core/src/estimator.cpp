#include "cmest/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmest/errors.hpp"
#include "cmest/format.hpp"
#include "cmest/numerics.hpp"
#include "descriptor.hpp"

namespace cmest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using numerics::log_gamma;

// Exponent k and shift b of f(y) = y^(k-1) e^(-b y) / Gamma(k), when q has
// that form.
struct PowerForm {
  double k;
  double b;
};

std::optional<PowerForm> power_form(const QFunction& q) {
  switch (q.kind) {
    case QKind::reciprocal: return PowerForm{1.0, 0.0};
    case QKind::power: return PowerForm{q.k, 0.0};
    case QKind::shifted_power: return PowerForm{q.k, q.b};
    default: return std::nullopt;
  }
}

ClosedForm match_closed_form(const ExpFamilyModel& m, const QFunction& q) {
  if (q.kind == QKind::mixture) {
    for (const auto& [w, c] : q.components) {
      if (match_closed_form(m, c) == ClosedForm::none) return ClosedForm::none;
    }
    return ClosedForm::mixture;
  }
  const auto pf = power_form(q);
  if (!pf || m.support.orientation != Orientation::lower_unbounded) return ClosedForm::none;
  const ModelShape& sh = m.shape;
  const bool truncated = std::isfinite(m.support.upper()) && sh.family == Family::normal;
  switch (sh.family) {
    case Family::normal:
      if (truncated) return pf->k == 1.0 ? ClosedForm::truncated_normal : ClosedForm::none;
      if (pf->k == 2.0 || (pf->k == 1.0 && q.kind == QKind::shifted_power)) {
        return ClosedForm::normal_shifted_power;
      }
      if (pf->k == 1.0) return sh.tilt != 0.0 ? ClosedForm::normal_location : ClosedForm::normal_mills;
      return ClosedForm::none;
    case Family::gamma:
      if (!sh.reflected || sh.tilt != 0.0 || pf->b != 0.0) return ClosedForm::none;
      if (m.support.truncation) return pf->k == 1.0 ? ClosedForm::truncated_gamma : ClosedForm::none;
      return pf->k == 1.0 ? ClosedForm::gamma_linear : ClosedForm::gamma_power;
    case Family::inverse_gaussian:
      if (!sh.reflected || sh.tilt != 0.0 || m.support.truncation || pf->b != 0.0 || pf->k != 1.0) {
        return ClosedForm::none;
      }
      return ClosedForm::inverse_gaussian;
    case Family::other: break;
  }
  return ClosedForm::none;
}

struct ClosedValue {
  double value;
  double log_value;
  bool from_log;
};

// Closed-form delta at reduced coordinate y.
ClosedValue closed_value(ClosedForm tag, const ExpFamilyModel& m, const QFunction& q, double y) {
  const ModelShape& sh = m.shape;
  switch (tag) {
    case ClosedForm::normal_mills:
    case ClosedForm::normal_location:
    case ClosedForm::normal_shifted_power:
    case ClosedForm::truncated_normal: {
      // h(y+u)/h(y) f(u) = exp(-u^2/(2 s^2) - u z / s) u^(k-1)/Gamma(k) with
      // z = (y + s^2 c)/s, c = b - tilt.
      const auto pf = *power_form(q);
      const double s = sh.scale;
      const double c = pf.b - sh.tilt;
      const double z = (y + s * s * c) / s;
      double lv;
      if (tag == ClosedForm::truncated_normal) {
        const double zb = (m.support.upper() + s * s * c) / s;
        lv = std::log(s) + numerics::std_normal_log_interval_mass(z, zb) - numerics::std_normal_log_pdf(z);
      } else if (pf.k == 1.0) {
        lv = std::log(s) + numerics::log_mills_ratio(z);
        // Direct evaluation is a touch more accurate where it cannot overflow.
        if (z > -30.0) return {s * numerics::mills_ratio(z), lv, false};
      } else {
        lv = 2.0 * std::log(s) + numerics::log_mills_ratio_complement(z);
        if (z > -30.0) return {s * s * numerics::mills_ratio_complement(z), lv, false};
      }
      return {std::exp(lv), lv, true};
    }
    case ClosedForm::gamma_linear: {
      const double x = -y;
      const double v = x / sh.shape;
      return {v, std::log(v), false};
    }
    case ClosedForm::gamma_power: {
      const double x = -y;
      const double lv = q.k * std::log(x) + log_gamma(sh.shape) - log_gamma(sh.shape + q.k);
      return {std::exp(lv), lv, true};
    }
    case ClosedForm::truncated_gamma: {
      // (T^alpha - b^alpha) / (alpha T^(alpha-1)) = (T/alpha)(1 - (b/T)^alpha)
      const double t = -y;
      const double b = -m.support.upper();
      const double a = sh.shape;
      const double v = t / a * -std::expm1(a * std::log(b / t));
      return {v, std::log(v), false};
    }
    case ClosedForm::inverse_gaussian: {
      const double x = -y;
      const double lambda = sh.shape;
      const double v = 2.0 * x * std::sqrt(x / lambda) * numerics::mills_ratio(std::sqrt(lambda / x));
      return {v, std::log(v), false};
    }
    case ClosedForm::mixture: {
      double v = 0.0;
      for (const auto& [w, c] : q.components) v += w * closed_value(match_closed_form(m, c), m, c, y).value;
      return {v, std::log(std::abs(v)), false};
    }
    case ClosedForm::none: break;
  }
  throw DomainError("closed_value: no closed form");
}

void require_support(const ExpFamilyModel& m, double y, const char* what) {
  if (!m.support.contains(y)) {
    throw DomainError(std::string(what) + ": x=" + format_number(y) + " outside the support (" +
                      format_number(m.support.lower()) + ", " + format_number(m.support.upper()) + ") of " +
                      m.name);
  }
}

Estimate combine(const QFunction& q, const std::vector<Estimate>& parts) {
  Estimate e;
  double bound = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double w = q.components[i].first;
    e.value += w * parts[i].value;
    bound += std::abs(w) * parts[i].error_bound.value_or(0.0);
  }
  e.log_value = std::log(std::abs(e.value));
  e.error_bound = bound;
  return e;
}

// The engine proper: delta(y) = int_{f_lo}^{min(f_hi, U-y)} exp(log h(y+u) -
// log h(y) + log f(u)) du for a (-inf, U) model.
Estimate generic_integral(const ExpFamilyModel& m, const QFunction& q, double y, quadrature::Tolerance tol) {
  if (q.kind == QKind::mixture) {
    std::vector<Estimate> parts;
    for (const auto& [w, c] : q.components) parts.push_back(generic_integral(m, c, y, tol));
    return combine(q, parts);
  }
  Estimate e;
  e.method = Method::quadrature;
  e.log_scale = true;
  const double lo = q.f_support.lo;
  const double hi = std::min(q.f_support.hi, m.support.upper() - y);
  if (!(hi > lo)) {
    e.value = 0.0;
    e.log_value = -kInf;
    e.error_bound = 0.0;
    return e;
  }
  const double lh_y = m.log_h(y);
  const auto& log_h = m.log_h;
  const auto& log_f = q.log_f;
  const double upper = m.support.upper();
  quadrature::QuadResult r;
  if (hi < q.f_support.hi && std::isfinite(upper)) {
    // h is usually singular or vanishing at U, and y + u loses the distance
    // to U to rounding. The half next to U is integrated in v = hi - u so
    // that h sees U - v exactly.
    const double mid = lo + 0.5 * (hi - lo);
    const auto a = quadrature::integrate([&](double u) { return log_h(y + u) - lh_y + log_f(u); }, lo, mid, tol);
    const auto b = quadrature::integrate([&](double v) { return log_h(upper - v) - lh_y + log_f(hi - v); }, 0.0,
                                         hi - mid, tol);
    r.value = a.value + b.value;
    r.log_value = numerics::log_add_exp(a.log_value, b.log_value);
    r.abs_error_bound = a.abs_error_bound + b.abs_error_bound;
    r.nodes_used = a.nodes_used + b.nodes_used;
    r.converged = a.converged && b.converged;
  } else {
    r = quadrature::integrate([&](double u) { return log_h(y + u) - lh_y + log_f(u); }, lo, hi, tol);
  }
  if (!r.converged) {
    throw ConvergenceError("estimator integral did not converge for " + m.name + ", " + q.name +
                               " at x=" + format_number(y),
                           r.abs_error_bound);
  }
  e.value = r.value;
  e.log_value = r.log_value;
  e.error_bound = r.abs_error_bound;
  return e;
}

}  // namespace

Transform parse_transform(std::string_view descriptor) {
  const auto parts = detail::split_descriptor(descriptor);
  detail::ParamReader reader(parts);
  auto finite = [](const std::string& key, double v) {
    if (!std::isfinite(v)) throw ParseError("key '" + key + "' must be finite", key);
    return v;
  };
  Transform t;
  if (parts.head == "shift") {
    t = Transform::shift(finite("theta0", reader.require("theta0")));
  } else if (parts.head == "flip") {
    t = Transform::flip();
  } else if (parts.head == "trunc") {
    t = Transform::truncate(finite("b", reader.require("b")));
  } else {
    throw ParseError("unknown transform '" + parts.head + "' (expected shift, flip, trunc)", parts.head);
  }
  reader.finish();
  return t;
}

std::string transform_id(std::span<const Transform> chain) {
  if (chain.empty()) return "identity";
  std::string out;
  for (const auto& t : chain) {
    if (!out.empty()) out += "|";
    switch (t.kind) {
      case Transform::Kind::location_shift: out += "shift(" + format_number(t.value) + ")"; break;
      case Transform::Kind::sign_flip: out += "flip"; break;
      case Transform::Kind::truncation: out += "trunc(" + format_number(t.value) + ")"; break;
    }
  }
  return out;
}

const char* to_string(Method m) { return m == Method::closed_form ? "closed_form" : "quadrature"; }

const char* to_string(ClosedForm c) {
  switch (c) {
    case ClosedForm::none: return "none";
    case ClosedForm::normal_mills: return "normal_mills";
    case ClosedForm::normal_location: return "normal_location";
    case ClosedForm::normal_shifted_power: return "normal_shifted_power";
    case ClosedForm::truncated_normal: return "truncated_normal";
    case ClosedForm::gamma_linear: return "gamma_linear";
    case ClosedForm::gamma_power: return "gamma_power";
    case ClosedForm::truncated_gamma: return "truncated_gamma";
    case ClosedForm::inverse_gaussian: return "inverse_gaussian";
    case ClosedForm::mixture: return "mixture";
  }
  return "none";
}

EstimatorSpec resolve(const ExpFamilyModel& model, const QFunction& q, std::vector<Transform> transforms,
                      EstimatorOptions options) {
  EstimatorSpec spec;
  spec.source = model;
  spec.q = q;
  spec.options = options;
  ExpFamilyModel m = model;
  for (const auto& t : transforms) {
    switch (t.kind) {
      case Transform::Kind::location_shift:
        m = models::tilt(m, t.value);
        spec.param.shift += t.value;
        break;
      case Transform::Kind::sign_flip:
        m = models::reflect(m);
        spec.x_sign = -spec.x_sign;
        break;
      case Transform::Kind::truncation:
        if (!std::isfinite(t.value)) throw DomainError("truncation bound must be finite");
        m = models::truncate(m, spec.x_sign * t.value);
        break;
    }
  }
  spec.transforms = std::move(transforms);
  if (m.support.orientation == Orientation::upper_unbounded) {
    if (m.support.doubly_infinite()) {
      // Same observation, opposite orientation: parameter becomes -psi.
      m = models::reorient(m);
      spec.param.sign = -spec.param.sign;
      spec.param.shift = -spec.param.shift;
    } else {
      m = models::reflect(m);
      spec.x_sign = -spec.x_sign;
    }
  }
  spec.reduced = std::move(m);
  spec.closed_form = options.force_quadrature ? ClosedForm::none : match_closed_form(spec.reduced, q);
  spec.method = spec.closed_form == ClosedForm::none ? Method::quadrature : Method::closed_form;
  return spec;
}

Estimate evaluate_reduced(const EstimatorSpec& spec, double y) {
  if (!spec.reduced.support.contains(y)) {
    const double a = spec.x_sign * spec.reduced.support.lower();
    const double b = spec.x_sign * spec.reduced.support.upper();
    throw DomainError("estimate: x=" + format_number(spec.x_sign * y) + " outside the support (" +
                      format_number(std::min(a, b)) + ", " + format_number(std::max(a, b)) + ")");
  }
  if (spec.method == Method::closed_form) {
    Estimate e;
    const auto cv = closed_value(spec.closed_form, spec.reduced, spec.q, y);
    e.value = cv.value;
    e.log_value = cv.log_value;
    e.method = Method::closed_form;
    e.closed_form = spec.closed_form;
    e.log_scale = cv.from_log;
    return e;
  }
  return generic_integral(spec.reduced, spec.q, y, spec.options.tol);
}

Estimate evaluate(const EstimatorSpec& spec, double x) { return evaluate_reduced(spec, spec.x_sign * x); }

void check_theta(const EstimatorSpec& spec, double theta) {
  if (!std::isfinite(theta)) throw DomainError("theta must be finite");
  const double psi = spec.param(theta);
  const Interval& dom = spec.reduced.theta_domain;
  if (!dom.contains(psi)) {
    throw DomainError(spec.model_id() + ": theta=" + format_number(theta) + " maps to " + format_number(psi) +
                      ", outside the parameter space (" + format_number(dom.lo) + ", " + format_number(dom.hi) +
                      ")");
  }
  if (!spec.q.domain.contains(psi)) {
    throw DomainError(spec.q_id() + ": theta=" + format_number(theta) + " outside C = (" +
                      format_number(spec.q.domain.lo) + ", " + format_number(spec.q.domain.hi) + ")" +
                      (psi != theta ? " after the transform (psi=" + format_number(psi) + ")" : std::string()));
  }
}

double target(const EstimatorSpec& spec, double theta) {
  check_theta(spec, theta);
  return eval_q(spec.q, spec.param(theta));
}

Estimate estimate_generic(const ExpFamilyModel& model, const QFunction& q, double x, quadrature::Tolerance tol) {
  if (model.support.orientation != Orientation::lower_unbounded) {
    throw DomainError(model.name + ": the generic estimator needs a (-inf, a) support; use estimate_signflip");
  }
  require_support(model, x, "estimate_generic");
  return generic_integral(model, q, x, tol);
}

Estimate estimate_location(const ExpFamilyModel& model, double x, double theta0, const QFunction& q) {
  const ExpFamilyModel tilted = models::tilt(model, theta0);
  if (tilted.support.orientation == Orientation::upper_unbounded) return estimate_signflip(tilted, x, q);
  return estimate_generic(tilted, q, x);
}

Estimate estimate_signflip(const ExpFamilyModel& model_upper, double x, const QFunction& q) {
  if (model_upper.support.orientation != Orientation::upper_unbounded) {
    throw DomainError(model_upper.name + ": estimate_signflip needs an (a', inf) support");
  }
  require_support(model_upper, x, "estimate_signflip");
  if (q.kind == QKind::mixture) {
    std::vector<Estimate> parts;
    for (const auto& [w, c] : q.components) parts.push_back(estimate_signflip(model_upper, x, c));
    return combine(q, parts);
  }
  Estimate e;
  e.log_scale = true;
  // s ranges over (max(a', x - f_hi), x - f_lo).
  const double lo = std::max(model_upper.support.lower(), x - q.f_support.hi);
  const double hi = x - q.f_support.lo;
  if (!(hi > lo)) {
    e.log_value = -kInf;
    e.error_bound = 0.0;
    return e;
  }
  const double lh_x = model_upper.log_h(x);
  const auto& log_h = model_upper.log_h;
  const auto& log_f = q.log_f;
  const auto r =
      quadrature::integrate([&](double s) { return log_h(s) + log_f(x - s) - lh_x; }, lo, hi, {1e-10, 1e-12});
  if (!r.converged) {
    throw ConvergenceError("mirrored estimator integral did not converge at x=" + format_number(x),
                           r.abs_error_bound);
  }
  e.value = r.value;
  e.log_value = r.log_value;
  e.error_bound = r.abs_error_bound;
  return e;
}

Estimate estimate_truncated(const ExpFamilyModel& model_trunc, double x, const QFunction& q) {
  if (!model_trunc.support.truncation) throw DomainError(model_trunc.name + ": model is not truncated");
  return evaluate(resolve(model_trunc, q), x);
}

double estimate_ratio_independent(std::span<const double> z1, std::span<const double> z2, double tau1,
                                  double tau2) {
  if (z1.empty() || z2.empty()) throw DomainError("ratio estimator: both samples must be nonempty");
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw DomainError("ratio estimator: tau1, tau2 must be positive");
  const double n2 = static_cast<double>(z2.size());
  const double mean1 = std::accumulate(z1.begin(), z1.end(), 0.0) / static_cast<double>(z1.size());
  const double mean2 = std::accumulate(z2.begin(), z2.end(), 0.0) / n2;
  const double c = std::sqrt(n2) / tau2;
  if (mean1 == 0.0) return 0.0;
  return c * mean1 * numerics::mills_ratio(c * mean2);
}

double estimate_ratio_bivariate(double y1, double y2, double sigma1, double sigma2, double rho) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw DomainError("ratio estimator: sigma1, sigma2 must be positive");
  if (!(std::abs(rho) <= 1.0)) throw DomainError("ratio estimator: |rho| must be <= 1");
  const double slope = rho * sigma1 / sigma2;
  const double w = y1 - slope * y2;
  if (w == 0.0) return slope;
  return w / sigma2 * numerics::mills_ratio(y2 / sigma2) + slope;
}

}  // namespace cmest
