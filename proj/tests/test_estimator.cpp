#include <gtest/gtest.h>

#include <cmath>

#include "cmest/errors.hpp"
#include "cmest/estimator.hpp"
#include "cmest/verify.hpp"
#include "oracle.hpp"

using namespace cmest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rel(double got, long double want) { return static_cast<double>(std::fabs(got / want - 1)); }

EstimatorSpec spec_of(const std::string& model, const std::string& q, std::vector<Transform> t = {},
                      bool force_quadrature = false) {
  EstimatorOptions o;
  o.force_quadrature = force_quadrature;
  return resolve(models::parse_model(model), qfunc::parse_q(q), std::move(t), o);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
  return v;
}

}  // namespace

TEST(Estimator, NormalReciprocalIsMillsRatio) {
  const auto s = spec_of("normal", "recip");
  EXPECT_EQ(s.method, Method::closed_form);
  EXPECT_EQ(s.closed_form, ClosedForm::normal_mills);
  for (double x : linspace(-8, 30, 39)) EXPECT_LT(rel(evaluate(s, x).value, oracle::mills(x)), 1e-13) << x;
  EXPECT_NEAR(evaluate(s, 0).value, 1.2533141373155003, 1e-15);
}

TEST(Estimator, NormalPowerTwoFromDefinition) {
  // (1/phi(x)) int_x^inf phi(s)(s - x) ds = 1 - x R(x)
  const auto s = spec_of("normal", "power:k=2");
  for (double x : linspace(-6, 12, 19)) {
    const long double want = 1 - x * oracle::mills(x);
    EXPECT_LT(rel(evaluate(s, x).value, want), 1e-11 * std::max(1.0, x * x)) << x;
  }
}

TEST(Estimator, ScaledNormalFromDefinition) {
  // sigma = 2: delta(x) = (1/h(x)) int_x^inf h(s) ds, h = phi(./2)/2
  const auto s = spec_of("normal:sigma=2", "recip");
  for (double x : {-3.0, 0.0, 1.0, 5.0}) {
    const long double want = 2 * oracle::mills(x / 2.0L);
    EXPECT_LT(rel(evaluate(s, x).value, want), 1e-13);
  }
}

TEST(Estimator, ShiftedPowerFromDefinition) {
  const auto s = spec_of("normal", "shiftpow:b=1,k=1");
  EXPECT_EQ(s.closed_form, ClosedForm::normal_shifted_power);
  for (double x : {-2.0, 0.0, 0.5, 3.0}) {
    const long double want =
        oracle::integrate_up([&](long double t) { return oracle::normal_pdf(x + t) * std::exp(-t); }, 0) /
        oracle::normal_pdf(x);
    EXPECT_LT(rel(evaluate(s, x).value, want), 1e-11) << x;
  }
}

TEST(Estimator, LocationShiftRecentres) {
  // h(x) e^{theta0 x} with h = phi: delta = R(x - theta0), unbiased for 1/(theta - theta0)
  const auto s = spec_of("normal", "recip", {Transform::shift(-1.0)});
  EXPECT_EQ(s.closed_form, ClosedForm::normal_location);
  EXPECT_EQ(s.transform_id(), "shift(-1)");
  for (double x : {-2.0, 0.0, 1.0, 4.0}) EXPECT_LT(rel(evaluate(s, x).value, oracle::mills(x + 1.0L)), 1e-13);
  EXPECT_DOUBLE_EQ(target(s, 0.5), 1 / 1.5);
  EXPECT_NO_THROW(check_theta(s, -0.5));
  EXPECT_THROW(check_theta(s, -1.0), DomainError);

  const auto lq = estimate_location(models::normal(), 0.3, -1.0);
  EXPECT_LT(rel(lq.value, oracle::mills(1.3L)), 1e-9);
  const auto zero = estimate_location(models::normal(), 0.3, 0.0);
  EXPECT_EQ(zero.value, estimate_generic(models::normal(), qfunc::reciprocal(), 0.3).value);
}

TEST(Estimator, TruncatedNormalFromDefinition) {
  const auto s = spec_of("truncnormal:sigma=1,b=1", "recip");
  EXPECT_EQ(s.closed_form, ClosedForm::truncated_normal);
  for (double x : {-9.0, -3.0, 0.0, 0.99}) {
    const long double want = (oracle::normal_cdf(1.0L) - oracle::normal_cdf(x)) / oracle::normal_pdf(x);
    EXPECT_LT(rel(evaluate(s, x).value, want), 1e-12) << x;
  }
  EXPECT_THROW(evaluate(s, 1.5), DomainError);
  // The same model reached through a truncation transform.
  const auto t = spec_of("normal", "recip", {Transform::truncate(1.0)});
  EXPECT_EQ(t.closed_form, ClosedForm::truncated_normal);
  EXPECT_DOUBLE_EQ(evaluate(t, 0.2).value, evaluate(s, 0.2).value);
}

TEST(Estimator, GammaClosedForms) {
  const auto s = spec_of("gamma:alpha=2", "recip");
  EXPECT_EQ(s.closed_form, ClosedForm::gamma_linear);
  EXPECT_DOUBLE_EQ(evaluate(s, 3.0).value, 1.5);
  const auto p = spec_of("gamma:alpha=2.5", "power:k=2");
  EXPECT_EQ(p.closed_form, ClosedForm::gamma_power);
  // x^2 Gamma(2.5)/Gamma(4.5) = x^2 / (2.5 * 3.5)
  EXPECT_NEAR(evaluate(p, 2.0).value, 4.0 / (2.5 * 3.5), 1e-14);
  EXPECT_THROW(evaluate(s, -1.0), DomainError);
}

TEST(Estimator, TruncatedGammaFromDefinition) {
  // (1/h(x)) int_T^x h(s) ds with h(s) = s^(alpha-1)
  const double alpha = 2.5, lo = 1.5;
  const auto s = spec_of("gamma:alpha=2.5,trunc_lo=1.5", "recip");
  EXPECT_EQ(s.closed_form, ClosedForm::truncated_gamma);
  for (double x : {1.6, 2.0, 10.0}) {
    const double want = std::pow(x, 1 - alpha) * (std::pow(x, alpha) - std::pow(lo, alpha)) / alpha;
    EXPECT_LT(rel(evaluate(s, x).value, want), 1e-13) << x;
  }
  const auto viaT = estimate_truncated(models::truncated_gamma(alpha, lo), 2.0);
  EXPECT_LT(rel(viaT.value, std::pow(2.0, -1.5) * (std::pow(2.0, 2.5) - std::pow(lo, 2.5)) / 2.5), 1e-12);
}

TEST(Estimator, InverseGaussianFromDefinition) {
  const double lambda = 1.5;
  const auto s = spec_of("invgauss:lambda=1.5", "recip");
  EXPECT_EQ(s.closed_form, ClosedForm::inverse_gaussian);
  const auto log_h = [&](long double x) { return -1.5L * std::log(x) - lambda / (2 * x); };
  for (double x : {0.05, 0.3, 1.0, 4.0, 25.0}) {
    const long double want =
        oracle::integrate([&](long double u) { return std::exp(log_h(u) - log_h(x)); }, 0, x);
    EXPECT_LT(rel(evaluate(s, x).value, want), 1e-11) << x;
  }
}

TEST(Estimator, WindowUsesQuadrature) {
  const auto s = spec_of("normal", "window:d1=0.5,d2=2");
  EXPECT_EQ(s.method, Method::quadrature);
  for (double x : {-3.0, 0.0, 2.0}) {
    const long double want = (oracle::normal_cdf(x + 2.0L) - oracle::normal_cdf(x + 0.5L)) / oracle::normal_pdf(x);
    const auto e = evaluate(s, x);
    EXPECT_LT(rel(e.value, want), 1e-9) << x;
    ASSERT_TRUE(e.error_bound.has_value());
    EXPECT_LE(*e.error_bound, 1e-9);
  }
}

TEST(Estimator, ClosedFormsAgreeWithGenericQuadrature) {
  struct Case {
    const char* model;
    const char* q;
    std::vector<Transform> t;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"normal", "recip", {}, -6, 20},
      {"normal", "recip", {Transform::shift(0.7)}, -5, 15},
      {"normal", "shiftpow:b=1,k=1", {}, -5, 10},
      {"normal", "shiftpow:b=1,k=2", {}, -5, 10},
      {"normal:sigma=0.5", "power:k=2", {}, -3, 5},
      {"truncnormal:sigma=1,b=0", "recip", {}, -12, -0.01},
      {"gamma:alpha=2", "recip", {}, 0.01, 30},
      {"gamma:alpha=0.5", "power:k=3", {}, 0.01, 30},
      {"gamma:alpha=3,trunc_lo=1", "recip", {}, 1.01, 30},
      {"invgauss:lambda=2", "recip", {}, 0.02, 40},
      {"gamma:alpha=3", "0.5*recip+2*power:k=2", {}, 0.1, 20},
  };
  for (const auto& c : cases) {
    const auto closed = spec_of(c.model, c.q, c.t);
    const auto quad = spec_of(c.model, c.q, c.t, true);
    ASSERT_EQ(closed.method, Method::closed_form) << c.model << ' ' << c.q;
    ASSERT_EQ(quad.method, Method::quadrature);
    for (double x : linspace(c.lo, c.hi, 20)) {
      const double a = evaluate(closed, x).value, b = evaluate(quad, x).value;
      EXPECT_LT(std::fabs(a / b - 1), 1e-8) << c.model << ' ' << c.q << " x=" << x;
    }
  }
}

TEST(Estimator, SignFlipRouteMatchesDirectIntegral) {
  for (const char* m : {"gamma:alpha=2", "gamma:alpha=0.7", "invgauss:lambda=1"}) {
    const auto model = models::parse_model(m);
    const auto s = resolve(model, qfunc::reciprocal());
    for (double x : {0.2, 1.0, 3.0}) {
      const auto direct = estimate_signflip(model, x);
      EXPECT_GT(direct.value, 0);
      EXPECT_LT(std::fabs(direct.value / evaluate(s, x).value - 1), 1e-9) << m << " x=" << x;
    }
  }
  EXPECT_THROW(estimate_signflip(models::truncated_normal(1, 0), -1.0), DomainError);
}

TEST(Estimator, FlipTransform) {
  // Flipping an (a', inf) model is the mirroring resolve does anyway; the
  // observation stays in source coordinates.
  const auto g = spec_of("gamma:alpha=2", "recip", {Transform::flip()});
  EXPECT_DOUBLE_EQ(evaluate(g, 3.0).value, 1.5);
  EXPECT_THROW(evaluate(g, -3.0), DomainError);
  // Normal: N(theta, 1) observed as -X is N(-theta, 1); estimates 1/(-theta).
  const auto n = spec_of("normal", "recip", {Transform::flip()});
  EXPECT_LT(rel(evaluate(n, 1.0).value, oracle::mills(-1.0L)), 1e-13);
  EXPECT_DOUBLE_EQ(target(n, -2.0), 0.5);
  EXPECT_THROW(check_theta(n, 2.0), DomainError);
}

TEST(Estimator, NestedExpectationEqualsTarget) {
  struct Case {
    const char* model;
    const char* q;
    std::vector<Transform> t;
    double theta;
  };
  const std::vector<Case> cases = {
      {"normal", "recip", {}, 1.0},
      {"normal", "shiftpow:b=1,k=2", {}, 0.2},
      {"normal", "window:d1=0,d2=1", {}, 0.5},
      {"normal", "recip", {Transform::shift(-1)}, -0.5},
      {"truncnormal:sigma=1,b=0", "recip", {}, 0.5},
      {"gamma:alpha=2", "recip", {}, 0.5},
      {"gamma:alpha=2", "recip", {Transform::shift(0.25)}, 1.0},
      {"gamma:alpha=2", "recip", {Transform::truncate(1.0)}, 1.0},
      {"invgauss:lambda=1", "recip", {}, 0.5},
      {"normal", "recip", {Transform::flip()}, -1.5},
  };
  for (const auto& c : cases) {
    const auto s = spec_of(c.model, c.q, c.t);
    const auto e = expectation_by_quadrature(s, c.theta);
    EXPECT_NEAR(e.value, target(s, c.theta), 1e-7 * target(s, c.theta)) << c.model << ' ' << c.q;
  }
}

TEST(Estimator, TransformGrammarAndIds) {
  EXPECT_EQ(parse_transform("shift:theta0=-1").kind, Transform::Kind::location_shift);
  EXPECT_EQ(parse_transform("shift:theta0=-1").value, -1.0);
  EXPECT_EQ(parse_transform("flip").kind, Transform::Kind::sign_flip);
  EXPECT_EQ(parse_transform("trunc:b=2.5").value, 2.5);
  EXPECT_THROW(parse_transform("rotate"), ParseError);
  EXPECT_THROW(parse_transform("shift"), ParseError);
  EXPECT_THROW(parse_transform("shift:theta0=inf"), ParseError);
  const std::vector<Transform> chain{Transform::shift(-1), Transform::truncate(0)};
  EXPECT_EQ(transform_id(chain), "shift(-1)|trunc(0)");
  EXPECT_EQ(transform_id({}), "identity");
}

TEST(Estimator, DomainChecks) {
  const auto s = spec_of("normal", "recip");
  EXPECT_THROW(check_theta(s, 0.0), DomainError);
  EXPECT_THROW(check_theta(s, -1.0), DomainError);
  EXPECT_THROW(check_theta(s, NAN), DomainError);
  EXPECT_NO_THROW(check_theta(s, 1e-3));
  const auto g = spec_of("gamma:alpha=2", "shiftpow:b=1,k=1");
  EXPECT_NO_THROW(check_theta(g, 0.5));
  EXPECT_THROW(check_theta(g, -0.5), DomainError);
  EXPECT_THROW(spec_of("gamma:alpha=2", "recip", {Transform::truncate(-1.0)}), DomainError);
  EXPECT_THROW(spec_of("gamma:alpha=2", "recip", {Transform::truncate(kInf)}), DomainError);
}

TEST(Estimator, ExtremeObservationsStayFinite) {
  const auto s = spec_of("normal", "recip");
  const auto e = evaluate(s, -45.0);
  EXPECT_TRUE(std::isinf(e.value) || e.value > 1e300);
  EXPECT_NEAR(e.log_value, 45.0 * 45.0 / 2 + std::log(std::sqrt(2 * M_PI)), 1e-9);
  EXPECT_GT(evaluate(s, 1e10).value, 0.0);
}

TEST(Estimator, RatioIndependentIsUnbiased) {
  // One draw per sample: E[(1/tau2) R(Z2/tau2)] over Z2 ~ N(mu2, tau2^2) is 1/mu2.
  const double mu2 = 0.8, tau2 = 0.6;
  const long double e = oracle::integrate_line(
      [&](long double z) {
        const double zd = static_cast<double>(z);
        const double one = 1.0;
        // R overflows below z = -37 tau2, where the product is below 1e-20.
        const long double est = estimate_ratio_independent({&one, 1}, {&zd, 1}, 1.0, tau2);
        return std::isfinite(est) ? est * oracle::normal_pdf((z - mu2) / tau2) / tau2 : 0.0L;
      },
      mu2, tau2, 1e-12L);
  EXPECT_NEAR(static_cast<double>(e), 1 / mu2, 1e-8);
  const std::vector<double> z1{1, 2, 3}, z2{0.5, 1.5};
  const double c = std::sqrt(2.0) / 0.5;
  EXPECT_LT(rel(estimate_ratio_independent(z1, z2, 1.0, 0.5), 2.0L * c * oracle::mills(c * 1.0L)), 1e-13);
  EXPECT_THROW(estimate_ratio_independent({}, z2, 1, 1), DomainError);
}

TEST(Estimator, RatioBivariateFormula) {
  const double s1 = 1.5, s2 = 0.5;
  for (double rho : {-0.5, 0.0, 0.5, 1.0}) {
    const double y1 = 2.2, y2 = 0.9;
    const double w = y1 - rho * s1 / s2 * y2;
    const long double want = w * oracle::mills(y2 / s2) / s2 + rho * s1 / s2;
    EXPECT_LT(rel(estimate_ratio_bivariate(y1, y2, s1, s2, rho), want), 1e-13) << rho;
  }
  EXPECT_THROW(estimate_ratio_bivariate(1, 1, 1, 1, 1.5), DomainError);
}
