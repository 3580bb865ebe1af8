#include "cmest/models.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "cmest/errors.hpp"
#include "cmest/format.hpp"
#include "cmest/numerics.hpp"
#include "cmest/quadrature.hpp"
#include "descriptor.hpp"

namespace cmest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using numerics::log_gamma;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite, got " + format_number(v));
  }
}

void check_theta(const ExpFamilyModel& m, double theta) {
  if (!m.theta_domain.contains(theta)) {
    throw DomainError(m.name + ": theta=" + format_number(theta) + " outside parameter space (" +
                      format_number(m.theta_domain.lo) + ", " + format_number(m.theta_domain.hi) + ")");
  }
}

// Draw from N(mu, sigma^2) conditioned on X < b.
double draw_truncated_normal(double mu, double sigma, double b, Rng& rng) {
  const double beta = (b - mu) / sigma;
  if (beta > -5.0) {
    const double mass = numerics::std_normal_cdf(beta);
    for (;;) {
      const double z = numerics::std_normal_quantile(rng.uniform() * mass);
      const double x = mu + sigma * z;
      if (x < b) return x;
    }
  }
  // Far tail: Robert's exponential proposal for W = -Z >= -beta.
  const double a = -beta;
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double w = a + rng.exponential() / rate;
    const double d = w - rate;
    if (std::log(rng.uniform()) <= -0.5 * d * d) {
      const double x = mu - sigma * w;
      if (x < b) return x;
    }
  }
}

// Draw from Gamma(alpha, rate 1) conditioned on Y > c, c > 0.
double draw_gamma_tail(double alpha, double c, double tail_mass, Rng& rng) {
  if (tail_mass >= 0.05) {
    for (;;) {
      const double y = rng.gamma(alpha);
      if (y > c) return y;
    }
  }
  if (alpha <= 1.0) {
    // c + Exp(1) proposal; acceptance (y/c)^(alpha-1) <= 1.
    for (;;) {
      const double y = c + rng.exponential();
      if (std::log(rng.uniform()) <= (alpha - 1.0) * (std::log(y) - std::log(c))) return y;
    }
  }
  // c + Exp(rate mu) proposal with the efficiency-optimal mu.
  const double t = c - alpha;
  double mu = (t + std::sqrt(t * t + 4.0 * c)) / (2.0 * c);
  mu = std::min(mu, 1.0 - 1e-12);
  const double y_star = (alpha - 1.0) / (1.0 - mu);
  const double log_bound = y_star > c ? (alpha - 1.0) * std::log(y_star) - (1.0 - mu) * y_star
                                      : (alpha - 1.0) * std::log(c) - (1.0 - mu) * c;
  for (;;) {
    const double y = c + rng.exponential() / mu;
    const double log_ratio = (alpha - 1.0) * std::log(y) - (1.0 - mu) * y - log_bound;
    if (std::log(rng.uniform()) <= log_ratio) return y;
  }
}

// Michael, Schucany & Haas transformation with a single chi-square(1) draw.
double draw_inverse_gaussian(double mu, double lambda, Rng& rng) {
  const double nu = rng.normal();
  const double y = nu * nu;
  const double my = mu * y;
  const double big = mu + mu * my / (2.0 * lambda) + mu / (2.0 * lambda) * std::sqrt(4.0 * lambda * my + my * my);
  // The two roots multiply to mu^2; take the small one without cancellation.
  const double small = mu * mu / big;
  return rng.uniform() <= mu / (mu + small) ? small : big;
}

double central_difference(const std::function<double(double)>& f, double x, int order) {
  const double h = 1e-4 * std::max(1.0, std::abs(x));
  if (order == 1) return (f(x + h) - f(x - h)) / (2.0 * h);
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

}  // namespace

double Support::lower() const {
  if (orientation == Orientation::lower_unbounded) return -kInf;
  return truncation ? *truncation : endpoint;
}

double Support::upper() const {
  if (orientation == Orientation::upper_unbounded) return kInf;
  return truncation ? *truncation : endpoint;
}

bool Support::doubly_infinite() const {
  return std::isinf(lower()) && std::isinf(upper());
}

double log_density(const ExpFamilyModel& model, double theta, double x) {
  check_theta(model, theta);
  if (!model.support.contains(x)) {
    throw DomainError(model.name + ": x=" + format_number(x) + " outside support (" +
                      format_number(model.support.lower()) + ", " + format_number(model.support.upper()) + ")");
  }
  return model.log_h(x) + model.support.sign() * theta * x - model.log_partition(theta);
}

void sample(const ExpFamilyModel& model, double theta, Rng& rng, std::span<double> out) {
  check_theta(model, theta);
  model.sampler(theta, rng, out);
}

std::vector<double> sample(const ExpFamilyModel& model, double theta, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample: n must be >= 1");
  std::vector<double> out(n);
  Rng rng(seed);
  sample(model, theta, rng, out);
  return out;
}

double model_mean(const ExpFamilyModel& model, double theta) {
  check_theta(model, theta);
  if (model.mean_fn) return model.mean_fn(theta);
  return model.support.sign() * central_difference(model.log_partition, theta, 1);
}

double model_variance(const ExpFamilyModel& model, double theta) {
  check_theta(model, theta);
  return central_difference(model.log_partition, theta, 2);
}

namespace models {

ExpFamilyModel normal(double sigma) {
  require_positive(sigma, "normal: sigma");
  ExpFamilyModel m;
  m.name = sigma == 1.0 ? "normal" : "normal:sigma=" + format_number(sigma);
  m.support = {Orientation::lower_unbounded, kInf, std::nullopt};
  const double log_sigma = std::log(sigma);
  m.log_h = [sigma, log_sigma](double x) { return numerics::std_normal_log_pdf(x / sigma) - log_sigma; };
  const double var = sigma * sigma;
  m.log_partition = [var](double theta) { return 0.5 * var * theta * theta; };
  m.theta_domain = {-kInf, kInf};
  m.sampler = [sigma, var](double theta, Rng& rng, std::span<double> out) {
    const double mu = var * theta;
    for (auto& x : out) x = mu + sigma * rng.normal();
  };
  m.mean_fn = [var](double theta) { return var * theta; };
  m.shape = {Family::normal, sigma, 1.0, 0.0, false};
  return m;
}

ExpFamilyModel truncated_normal(double sigma, double b) {
  require_positive(sigma, "truncnormal: sigma");
  if (!std::isfinite(b)) throw DomainError("truncnormal: b must be finite");
  ExpFamilyModel m = normal(sigma);
  m.name = "truncnormal:sigma=" + format_number(sigma) + ",b=" + format_number(b);
  m.support.truncation = b;
  const double var = sigma * sigma;
  m.log_partition = [var, sigma, b](double theta) {
    return 0.5 * var * theta * theta + numerics::std_normal_log_cdf((b - var * theta) / sigma);
  };
  m.sampler = [sigma, var, b](double theta, Rng& rng, std::span<double> out) {
    for (auto& x : out) x = draw_truncated_normal(var * theta, sigma, b, rng);
  };
  // E[T] = mu - sigma * phi(beta) / Phi(beta) = mu - sigma / R(-beta).
  m.mean_fn = [var, sigma, b](double theta) {
    const double mu = var * theta;
    return mu - sigma / numerics::mills_ratio(-(b - mu) / sigma);
  };
  return m;
}

ExpFamilyModel gamma(double alpha) {
  require_positive(alpha, "gamma: alpha");
  ExpFamilyModel m;
  m.name = "gamma:alpha=" + format_number(alpha);
  m.support = {Orientation::upper_unbounded, 0.0, std::nullopt};
  m.log_h = [alpha](double x) { return (alpha - 1.0) * std::log(x); };
  const double lg = log_gamma(alpha);
  m.log_partition = [alpha, lg](double rate) { return lg - alpha * std::log(rate); };
  m.theta_domain = {0.0, kInf};
  m.sampler = [alpha](double rate, Rng& rng, std::span<double> out) {
    for (auto& x : out) x = rng.gamma(alpha) / rate;
  };
  m.mean_fn = [alpha](double rate) { return alpha / rate; };
  m.shape = {Family::gamma, 1.0, alpha, 0.0, false};
  return m;
}

ExpFamilyModel truncated_gamma(double alpha, double b) {
  require_positive(b, "gamma: trunc_lo");
  ExpFamilyModel m = gamma(alpha);
  m.name += ",trunc_lo=" + format_number(b);
  m.support.truncation = b;
  const double lg = log_gamma(alpha);
  m.log_partition = [alpha, lg, b](double rate) {
    return lg - alpha * std::log(rate) + numerics::log_upper_incomplete_gamma_regularized(alpha, rate * b);
  };
  m.sampler = [alpha, b](double rate, Rng& rng, std::span<double> out) {
    const double c = rate * b;
    const double tail = numerics::upper_incomplete_gamma_regularized(alpha, c);
    for (auto& x : out) x = draw_gamma_tail(alpha, c, tail, rng) / rate;
  };
  m.mean_fn = [alpha, b](double rate) {
    const double c = rate * b;
    return alpha / rate *
           std::exp(numerics::log_upper_incomplete_gamma_regularized(alpha + 1.0, c) -
                    numerics::log_upper_incomplete_gamma_regularized(alpha, c));
  };
  return m;
}

ExpFamilyModel inverse_gaussian(double lambda) {
  require_positive(lambda, "invgauss: lambda");
  ExpFamilyModel m;
  m.name = "invgauss:lambda=" + format_number(lambda);
  m.support = {Orientation::upper_unbounded, 0.0, std::nullopt};
  m.log_h = [lambda](double x) { return -1.5 * std::log(x) - lambda / (2.0 * x); };
  // int h(x) e^{-theta x} dx = sqrt(2 pi / lambda) exp(-sqrt(2 lambda theta)).
  const double log_const = 0.5 * std::log(2.0 * numerics::kPi / lambda);
  m.log_partition = [lambda, log_const](double theta) { return log_const - std::sqrt(2.0 * lambda * theta); };
  m.theta_domain = {0.0, kInf};
  m.sampler = [lambda](double theta, Rng& rng, std::span<double> out) {
    const double mu = std::sqrt(lambda / (2.0 * theta));
    for (auto& x : out) x = draw_inverse_gaussian(mu, lambda, rng);
  };
  m.mean_fn = [lambda](double theta) { return std::sqrt(lambda / (2.0 * theta)); };
  m.shape = {Family::inverse_gaussian, 1.0, lambda, 0.0, false};
  return m;
}

double inverse_gaussian_theta(double mu, double lambda) {
  require_positive(mu, "invgauss: mu");
  require_positive(lambda, "invgauss: lambda");
  return lambda / (2.0 * mu * mu);
}

ExpFamilyModel tilt(const ExpFamilyModel& model, double theta0) {
  if (!std::isfinite(theta0)) throw DomainError("location shift: theta0 must be finite");
  ExpFamilyModel m = model;
  const double s = model.support.sign();
  m.name = model.name + "|shift(" + format_number(theta0) + ")";
  m.log_h = [base = model.log_h, c = s * theta0](double x) { return base(x) + c * x; };
  m.log_partition = [base = model.log_partition, theta0](double psi) { return base(psi + theta0); };
  m.theta_domain = {model.theta_domain.lo - theta0, model.theta_domain.hi - theta0};
  m.sampler = [base = model.sampler, theta0](double psi, Rng& rng, std::span<double> out) {
    base(psi + theta0, rng, out);
  };
  if (model.mean_fn) m.mean_fn = [base = model.mean_fn, theta0](double psi) { return base(psi + theta0); };
  m.shape.tilt += s * theta0;
  return m;
}

ExpFamilyModel reflect(const ExpFamilyModel& model) {
  ExpFamilyModel m = model;
  m.name = model.name + "|flip";
  m.support.orientation = model.support.orientation == Orientation::lower_unbounded
                              ? Orientation::upper_unbounded
                              : Orientation::lower_unbounded;
  m.support.endpoint = -model.support.endpoint;
  if (model.support.truncation) m.support.truncation = -*model.support.truncation;
  m.log_h = [base = model.log_h](double y) { return base(-y); };
  m.sampler = [base = model.sampler](double theta, Rng& rng, std::span<double> out) {
    base(theta, rng, out);
    for (auto& v : out) v = -v;
  };
  if (model.mean_fn) m.mean_fn = [base = model.mean_fn](double theta) { return -base(theta); };
  m.shape.reflected = !model.shape.reflected;
  m.shape.tilt = -model.shape.tilt;
  return m;
}

ExpFamilyModel reorient(const ExpFamilyModel& model) {
  if (!model.support.doubly_infinite()) {
    throw DomainError(model.name + ": reorientation needs a support equal to the whole real line");
  }
  ExpFamilyModel m = model;
  m.support.orientation = model.support.orientation == Orientation::lower_unbounded
                              ? Orientation::upper_unbounded
                              : Orientation::lower_unbounded;
  m.support.endpoint = -model.support.endpoint;
  m.log_partition = [base = model.log_partition](double psi) { return base(-psi); };
  m.theta_domain = {-model.theta_domain.hi, -model.theta_domain.lo};
  m.sampler = [base = model.sampler](double psi, Rng& rng, std::span<double> out) { base(-psi, rng, out); };
  if (model.mean_fn) m.mean_fn = [base = model.mean_fn](double psi) { return base(-psi); };
  return m;
}

ExpFamilyModel truncate(const ExpFamilyModel& model, double b) {
  if (!model.support.contains(b)) {
    throw DomainError(model.name + ": truncation point " + format_number(b) + " must lie inside the support");
  }
  const ModelShape& sh = model.shape;
  const bool plain = sh.tilt == 0.0 && !sh.reflected && !model.support.truncation;
  if (plain && sh.family == Family::normal && model.support.orientation == Orientation::lower_unbounded &&
      model.theta_domain.lo == -kInf) {
    return truncated_normal(sh.scale, b);
  }
  if (plain && sh.family == Family::gamma && model.support.orientation == Orientation::upper_unbounded) {
    return truncated_gamma(sh.shape, b);
  }

  ExpFamilyModel m = model;
  m.name = model.name + "|trunc(" + format_number(b) + ")";
  m.support.truncation = b;
  const double lo = m.support.lower();
  const double hi = m.support.upper();
  const double s = model.support.sign();
  m.log_partition = [log_h = model.log_h, lo, hi, s](double theta) {
    const auto r = quadrature::integrate([&](double x) { return log_h(x) + s * theta * x; }, lo, hi,
                                         {0.0, 1e-14});
    if (!r.converged) throw ConvergenceError("truncated log-partition did not converge", r.abs_error_bound);
    return r.log_value;
  };
  m.sampler = [base = model.sampler, lo, hi](double theta, Rng& rng, std::span<double> out) {
    std::vector<double> buf(256);
    std::size_t filled = 0;
    std::size_t tried = 0;
    while (filled < out.size()) {
      base(theta, rng, buf);
      tried += buf.size();
      for (double v : buf) {
        if (v > lo && v < hi && filled < out.size()) out[filled++] = v;
      }
      if (filled == 0 && tried > 10'000'000) {
        throw ConvergenceError("truncated sampler: acceptance rate below 1e-7", 0.0);
      }
    }
  };
  m.mean_fn = nullptr;
  return m;
}

ExpFamilyModel sufficient_statistic(const ExpFamilyModel& model, std::size_t n) {
  if (n == 0) throw DomainError("sufficient statistic: sample size must be >= 1");
  const ModelShape& sh = model.shape;
  const bool plain = sh.tilt == 0.0 && !sh.reflected && !model.support.truncation;
  if (plain) {
    const double dn = static_cast<double>(n);
    switch (sh.family) {
      case Family::normal: return normal(sh.scale * std::sqrt(dn));
      case Family::gamma: return gamma(sh.shape * dn);
      case Family::inverse_gaussian: return inverse_gaussian(sh.shape * dn * dn);
      case Family::other: break;
    }
  }
  throw DomainError(model.name + ": no catalog model for the sum of an i.i.d. sample");
}

std::vector<CatalogEntry> catalog() {
  return {
      {"normal", "normal", "N(theta, 1); h = phi, support (-inf, inf)", normal()},
      {"normal:sigma", "normal:sigma=<v>",
       "N(mu, sigma^2) with theta = mu/sigma^2; h(x) = phi(x/sigma)/sigma", normal(2.0)},
      {"gamma", "gamma:alpha=<v>", "Gamma(alpha, rate theta'); h(x) = x^(alpha-1) on (0, inf)", gamma(2.0)},
      {"gamma:trunc_lo", "gamma:alpha=<v>,trunc_lo=<b>", "Gamma(alpha, rate theta') given X > b",
       truncated_gamma(2.0, 1.0)},
      {"invgauss", "invgauss:lambda=<v>",
       "IG(mu, lambda), theta' = lambda/(2 mu^2); h(x) = x^(-3/2) e^(-lambda/(2x))", inverse_gaussian(1.0)},
      {"truncnormal", "truncnormal:sigma=<v>,b=<v>",
       "N(mu, sigma^2) given X <= b, theta = mu/sigma^2", truncated_normal(1.0, 0.0)},
  };
}

ExpFamilyModel parse_model(std::string_view descriptor) {
  const auto parts = detail::split_descriptor(descriptor);
  const std::string head = parts.head;
  detail::ParamReader reader(parts);
  auto positive = [&](const std::string& key, std::optional<double> v) {
    if (!v) return v;
    if (!(*v > 0.0) || !std::isfinite(*v)) {
      throw ParseError("key '" + key + "' must be positive and finite, got " + format_number(*v), key);
    }
    return v;
  };
  auto finite = [&](const std::string& key, double v) {
    if (!std::isfinite(v)) throw ParseError("key '" + key + "' must be finite", key);
    return v;
  };
  if (head == "normal") {
    const double sigma = positive("sigma", reader.take("sigma")).value_or(1.0);
    reader.finish();
    return normal(sigma);
  }
  if (head == "gamma") {
    const double alpha = *positive("alpha", reader.require("alpha"));
    const auto b = positive("trunc_lo", reader.take("trunc_lo"));
    reader.finish();
    return b ? truncated_gamma(alpha, *b) : gamma(alpha);
  }
  if (head == "invgauss") {
    const double lambda = *positive("lambda", reader.require("lambda"));
    reader.finish();
    return inverse_gaussian(lambda);
  }
  if (head == "truncnormal") {
    const double sigma = positive("sigma", reader.take("sigma")).value_or(1.0);
    const double b = finite("b", reader.require("b"));
    reader.finish();
    return truncated_normal(sigma, b);
  }
  throw ParseError("unknown model '" + head + "' (expected normal, gamma, invgauss, truncnormal)", head);
}

}  // namespace models
}  // namespace cmest
