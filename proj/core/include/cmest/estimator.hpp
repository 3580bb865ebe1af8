#pragma once

// Unbiased estimators of q(theta) for a completely monotone q.
//
// For a model with support (-inf, a) and q(theta) = int f(y) e^{-y theta} dy,
//
//     delta(x) = (1/h(x)) int_x^a h(s) f(s - x) ds
//
// is unbiased for q(theta). Everything else reduces to that integral:
// location shifts re-tilt h, a sign flip mirrors the support, and truncation
// moves the upper limit. An EstimatorSpec records the reduction once; after
// that each evaluation is either a closed form or one quadrature.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmest/models.hpp"
#include "cmest/qfunc.hpp"
#include "cmest/quadrature.hpp"

namespace cmest {

struct Transform {
  enum class Kind { location_shift, sign_flip, truncation };
  Kind kind = Kind::location_shift;
  /// theta0 for a location shift, the bound b (data coordinates) for a
  /// truncation; unused for a sign flip.
  double value = 0.0;

  static Transform shift(double theta0) { return {Kind::location_shift, theta0}; }
  static Transform flip() { return {Kind::sign_flip, 0.0}; }
  static Transform truncate(double b) { return {Kind::truncation, b}; }
};

/// Grammar: `shift:theta0=<v>`, `flip`, `trunc:b=<v>`.
Transform parse_transform(std::string_view descriptor);

/// "identity" or the chain joined by '|', e.g. "shift(-1)|trunc(0)".
std::string transform_id(std::span<const Transform> chain);

/// psi = sign * theta - shift: the parameter of the reduced model as a
/// function of the parameter of the model the data came from.
struct ParameterMap {
  double sign = 1.0;
  double shift = 0.0;

  double operator()(double theta) const { return sign * theta - shift; }
};

enum class Method { closed_form, quadrature };

enum class ClosedForm {
  none,
  normal_mills,          ///< sigma R(x / sigma)
  normal_location,       ///< Mills ratio of the re-centred observation
  normal_shifted_power,  ///< (b + theta)^-k, k in {1, 2}
  truncated_normal,
  gamma_linear,          ///< X / alpha
  gamma_power,           ///< X^k Gamma(alpha) / Gamma(alpha + k)
  truncated_gamma,
  inverse_gaussian,
  mixture,               ///< every component of a mixture has a closed form
};

const char* to_string(Method m);
const char* to_string(ClosedForm c);

struct EstimatorOptions {
  /// Skip closed forms; used to cross-validate them.
  bool force_quadrature = false;
  quadrature::Tolerance tol{1e-10, 1e-12};
};

struct EstimatorSpec {
  ExpFamilyModel source;
  QFunction q;
  std::vector<Transform> transforms;
  /// The model after all transforms, in (-inf, a) orientation.
  ExpFamilyModel reduced;
  /// Observation y fed to the reduced model is x_sign * x.
  double x_sign = 1.0;
  ParameterMap param;
  Method method = Method::quadrature;
  ClosedForm closed_form = ClosedForm::none;
  EstimatorOptions options;

  std::string model_id() const { return source.name; }
  std::string q_id() const { return q.name; }
  std::string transform_id() const { return cmest::transform_id(transforms); }
};

struct Estimate {
  double value = 0.0;
  /// log |value|; stays finite where value overflows.
  double log_value = 0.0;
  Method method = Method::quadrature;
  ClosedForm closed_form = ClosedForm::none;
  /// Absolute error bound of the quadrature, when one was used.
  std::optional<double> error_bound;
  /// value was assembled as exp of a log-space quantity.
  bool log_scale = false;
};

/// Applies the transform chain, mirrors (a', inf) models onto (-inf, a), and
/// picks a closed form when one matches. Throws DomainError when a transform
/// does not fit the model.
EstimatorSpec resolve(const ExpFamilyModel& model, const QFunction& q, std::vector<Transform> transforms = {},
                      EstimatorOptions options = {});

/// delta at an observation x of the source model. Throws DomainError when x
/// lies outside the (transformed) support, ConvergenceError when the
/// quadrature fails.
Estimate evaluate(const EstimatorSpec& spec, double x);
/// Same, for an observation y already in reduced coordinates.
Estimate evaluate_reduced(const EstimatorSpec& spec, double y);

/// Throws DomainError unless theta is a valid source parameter: psi(theta)
/// must lie in the reduced model's parameter space and in C.
void check_theta(const EstimatorSpec& spec, double theta);
/// q(psi(theta)), the quantity the estimator is unbiased for.
double target(const EstimatorSpec& spec, double theta);

/// The quadrature engine itself; model must have (-inf, a) orientation.
Estimate estimate_generic(const ExpFamilyModel& model, const QFunction& q, double x,
                          quadrature::Tolerance tol = {1e-10, 1e-12});

/// Estimator of q(theta - theta0), via h(x) e^{theta0 x}. theta0 = 0 gives
/// estimate_generic bit for bit.
Estimate estimate_location(const ExpFamilyModel& model, double x, double theta0,
                           const QFunction& q = qfunc::reciprocal());

/// For an (a', inf) model with rate theta': the mirrored integral
/// (1/h(x)) int_{a'}^x h(s) f(x - s) ds, unbiased for q(theta'). Integrates
/// over s directly, independently of the reflected-model route.
Estimate estimate_signflip(const ExpFamilyModel& model_upper, double x,
                           const QFunction& q = qfunc::reciprocal());

/// Estimator for a truncated model; closed forms for the truncated normal and
/// truncated Gamma with q = 1/theta.
Estimate estimate_truncated(const ExpFamilyModel& model_trunc, double x,
                            const QFunction& q = qfunc::reciprocal());

/// mu1/mu2 from independent normal samples with known standard deviations:
/// c * mean(z1) * R(c * mean(z2)), c = sqrt(n2)/tau2. Unbiased when mu2 > 0.
double estimate_ratio_independent(std::span<const double> z1, std::span<const double> z2, double tau1,
                                  double tau2);

/// mu1/mu2 from one bivariate normal observation with known sigma1, sigma2
/// and correlation rho (|rho| = 1 allowed): W R(y2/sigma2)/sigma2 + rho
/// sigma1/sigma2 with W = y1 - rho (sigma1/sigma2) y2.
double estimate_ratio_bivariate(double y1, double y2, double sigma1, double sigma2, double rho);

}  // namespace cmest
