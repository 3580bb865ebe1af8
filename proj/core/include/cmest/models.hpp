#pragma once

// One-parameter continuous exponential families
//
//     f_theta(x) = h(x) exp(s * theta * x - A(theta)),   x in support,
//
// with s = +1 for supports of the form (-inf, a) and s = -1 for (a', inf).
// For s = -1 the parameter is the positive "rate" theta' of the mirrored
// form h(x) exp(-theta' x - A(theta')), so that e.g. the Gamma model is
// indexed by its rate and the inverse Gaussian by lambda / (2 mu^2).
//
// Densities are carried as logs throughout: the estimators divide by h(x),
// and h underflows long before the estimators do.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmest/random.hpp"

namespace cmest {

/// Open interval (lo, hi); either end may be infinite.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v > lo && v < hi; }
};

enum class Orientation {
  lower_unbounded,  ///< support (-inf, a)
  upper_unbounded,  ///< support (a', inf)
};

struct Support {
  Orientation orientation = Orientation::lower_unbounded;
  /// a for lower_unbounded, a' for upper_unbounded; may be infinite.
  double endpoint = std::numeric_limits<double>::infinity();
  /// Truncation bound b: support becomes (-inf, b) resp. (b, inf).
  std::optional<double> truncation;

  double lower() const;
  double upper() const;
  bool contains(double x) const { return x > lower() && x < upper(); }
  /// Coefficient s of theta * x in the exponent.
  double sign() const { return orientation == Orientation::lower_unbounded ? 1.0 : -1.0; }
  bool doubly_infinite() const;
};

enum class Family { normal, gamma, inverse_gaussian, other };

/// Structural identity of a model, used to recognise closed-form estimators
/// after transformations.
struct ModelShape {
  Family family = Family::other;
  /// sigma for the normal family.
  double scale = 1.0;
  /// alpha for Gamma, lambda for inverse Gaussian.
  double shape = 1.0;
  /// h(x) carries an extra factor exp(tilt * x).
  double tilt = 0.0;
  /// Model describes Y = -X for a catalog X.
  bool reflected = false;
};

/// Fills `out` with i.i.d. draws at parameter theta.
using Sampler = std::function<void(double theta, Rng& rng, std::span<double> out)>;

struct ExpFamilyModel {
  std::string name;
  Support support;
  std::function<double(double)> log_h;
  std::function<double(double)> log_partition;
  Interval theta_domain;
  Sampler sampler;
  /// E_theta[X]; empty when no closed form is known.
  std::function<double(double)> mean_fn;
  ModelShape shape;
};

/// log h(x) + s*theta*x - A(theta). Throws DomainError outside Theta or the
/// support.
double log_density(const ExpFamilyModel& model, double theta, double x);

/// n exact draws; deterministic for a given seed.
std::vector<double> sample(const ExpFamilyModel& model, double theta, std::size_t n,
                           std::uint64_t seed);
void sample(const ExpFamilyModel& model, double theta, Rng& rng, std::span<double> out);

/// E_theta[X]: mean_fn when present, otherwise s * A'(theta) by central
/// differences.
double model_mean(const ExpFamilyModel& model, double theta);
/// Var_theta[X] = A''(theta) by central differences.
double model_variance(const ExpFamilyModel& model, double theta);

namespace models {

/// N(sigma^2 theta, sigma^2) in natural form: h(x) = phi(x/sigma)/sigma,
/// theta = mu / sigma^2. sigma = 1 is the plain N(theta, 1) model.
ExpFamilyModel normal(double sigma = 1.0);

/// Z | Z <= b with Z ~ N(mu, sigma^2); natural parameter theta = mu / sigma^2.
ExpFamilyModel truncated_normal(double sigma, double b);

/// Gamma(alpha, rate theta'), h(x) = x^(alpha-1) on (0, inf).
ExpFamilyModel gamma(double alpha);

/// X | X > b for X ~ Gamma(alpha, rate theta'), b > 0.
ExpFamilyModel truncated_gamma(double alpha, double b);

/// IG(mu, lambda) with lambda known: h(x) = x^(-3/2) exp(-lambda/(2x)),
/// theta' = lambda / (2 mu^2).
ExpFamilyModel inverse_gaussian(double lambda);

/// theta' for IG(mu, lambda).
double inverse_gaussian_theta(double mu, double lambda);

/// h(x) e^{s*theta0*x}: the law at parameter psi is the original law at
/// psi + theta0.
ExpFamilyModel tilt(const ExpFamilyModel& model, double theta0);

/// Law of Y = -X. Orientation flips, the parameter keeps its meaning.
ExpFamilyModel reflect(const ExpFamilyModel& model);

/// Same law described with the opposite orientation and parameter -theta.
/// Only possible when the support is the whole real line.
ExpFamilyModel reorient(const ExpFamilyModel& model);

/// Truncation to (-inf, b) (lower_unbounded) or (b, inf) (upper_unbounded).
/// Catalog models map onto their truncated catalog counterparts; anything
/// else gets a numerical log-partition and a rejection sampler.
ExpFamilyModel truncate(const ExpFamilyModel& model, double b);

/// Model of T = X_1 + ... + X_n for n i.i.d. draws, when T stays in the
/// catalog (normal, Gamma, inverse Gaussian). Same parameter theta.
ExpFamilyModel sufficient_statistic(const ExpFamilyModel& model, std::size_t n);

struct CatalogEntry {
  std::string id;
  std::string grammar;
  std::string description;
  ExpFamilyModel example;
};

std::vector<CatalogEntry> catalog();

/// Descriptor grammar: `normal`, `normal:sigma=<v>`, `gamma:alpha=<v>`,
/// `gamma:alpha=<v>,trunc_lo=<b>`, `invgauss:lambda=<v>`,
/// `truncnormal:sigma=<v>,b=<v>`.
ExpFamilyModel parse_model(std::string_view descriptor);

}  // namespace models
}  // namespace cmest
