#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cmest/errors.hpp"
#include "cmest/models.hpp"
#include "oracle.hpp"

using namespace cmest;

namespace {

// Integral of the density over its support, with the substitution centred on
// the model mean so the mapped integrand has no spikes.
long double total_mass(const ExpFamilyModel& m, double theta) {
  const auto f = [&](long double x) -> long double {
    const double xd = static_cast<double>(x);
    if (!m.support.contains(xd)) return 0;
    return std::exp(static_cast<long double>(log_density(m, theta, xd)));
  };
  const double lo = m.support.lower(), hi = m.support.upper();
  if (std::isfinite(lo) && std::isfinite(hi)) return oracle::integrate(f, lo, hi);
  const double sd = std::sqrt(model_variance(m, theta));
  if (std::isfinite(lo)) return oracle::integrate_up(f, lo, std::max(sd, 1e-3));
  if (std::isfinite(hi)) return oracle::integrate_down(f, hi, std::max(sd, 1e-3));
  return oracle::integrate_line(f, model_mean(m, theta), sd);
}

long double first_moment(const ExpFamilyModel& m, double theta) {
  const double lo = m.support.lower(), hi = m.support.upper();
  const auto f = [&](long double x) -> long double {
    const double xd = static_cast<double>(x);
    if (!m.support.contains(xd)) return 0;
    return x * std::exp(static_cast<long double>(log_density(m, theta, xd)));
  };
  if (std::isfinite(lo) && std::isfinite(hi)) return oracle::integrate(f, lo, hi);
  if (std::isfinite(lo)) return oracle::integrate_up(f, lo, 1);
  if (std::isfinite(hi)) return oracle::integrate_down(f, hi, 1);
  return oracle::integrate_line(f, 0, 1);
}

std::vector<double> thetas_for(const ExpFamilyModel& m) {
  if (m.support.orientation == Orientation::upper_unbounded) return {0.3, 1.0, 4.0};
  return {-1.5, 0.0, 2.0};
}

// Empirical CDF at a few points against an exact CDF; each deviation is held
// to 5 binomial standard deviations.
void expect_cdf(const std::vector<double>& xs, const std::function<long double(long double)>& cdf,
                const std::vector<double>& at) {
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  for (double x : at) {
    const double p = static_cast<double>(cdf(x));
    const double got = static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / n;
    EXPECT_LT(std::fabs(got - p), 5 * std::sqrt(p * (1 - p) / n) + 1e-9) << "at x=" << x;
  }
}

}  // namespace

TEST(Models, CatalogDensitiesIntegrateToOne) {
  for (const auto& e : models::catalog()) {
    for (double theta : thetas_for(e.example)) {
      EXPECT_NEAR(static_cast<double>(total_mass(e.example, theta)), 1.0, 1e-10) << e.id << " theta=" << theta;
    }
  }
}

TEST(Models, MeanMatchesFirstMoment) {
  for (const auto& e : models::catalog()) {
    for (double theta : thetas_for(e.example)) {
      EXPECT_NEAR(model_mean(e.example, theta), static_cast<double>(first_moment(e.example, theta)), 1e-7)
          << e.id << " theta=" << theta;
    }
  }
}

TEST(Models, NormalDensityIsTextbookForm) {
  const auto m = models::normal(2.0);
  const double theta = 0.3, mu = theta * 4.0;
  for (double x : {-3.0, 0.0, 1.2, 7.0}) {
    const long double want = std::log(oracle::normal_pdf((x - mu) / 2.0L) / 2.0L);
    EXPECT_NEAR(log_density(m, theta, x), static_cast<double>(want), 1e-13);
  }
}

TEST(Models, GammaDensityIsTextbookForm) {
  const auto m = models::gamma(2.5);
  const double rate = 0.7;
  for (double x : {0.01, 1.0, 5.0}) {
    const double want = 2.5 * std::log(rate) + 1.5 * std::log(x) - rate * x - std::lgamma(2.5);
    EXPECT_NEAR(log_density(m, rate, x), want, 1e-13);
  }
}

TEST(Models, InverseGaussianDensityIsTextbookForm) {
  const double lambda = 3.0, mu = 1.7;
  const auto m = models::inverse_gaussian(lambda);
  const double theta = models::inverse_gaussian_theta(mu, lambda);
  EXPECT_NEAR(theta, lambda / (2 * mu * mu), 1e-15);
  for (double x : {0.2, 1.0, 4.0}) {
    const double want = 0.5 * std::log(lambda / (2 * M_PI * x * x * x)) - lambda * (x - mu) * (x - mu) / (2 * mu * mu * x);
    EXPECT_NEAR(log_density(m, theta, x), want, 1e-12);
  }
}

TEST(Models, OutsideSupportOrParameterSpaceThrows) {
  EXPECT_THROW(log_density(models::gamma(2), 1.0, -1.0), DomainError);
  EXPECT_THROW(log_density(models::gamma(2), -1.0, 1.0), DomainError);
  EXPECT_THROW(log_density(models::truncated_normal(1, 0), 0.0, 0.5), DomainError);
  EXPECT_THROW(models::gamma(-1.0), DomainError);
  EXPECT_THROW(models::truncated_gamma(2.0, 0.0), DomainError);
  EXPECT_THROW(models::reorient(models::gamma(2)), DomainError);
  EXPECT_THROW(models::truncate(models::gamma(2), -3.0), DomainError);
  EXPECT_THROW(models::sufficient_statistic(models::truncated_normal(1, 0), 3), DomainError);
}

TEST(Models, TiltShiftsTheParameter) {
  const auto base = models::gamma(3.0);
  const auto t = models::tilt(base, 0.5);
  for (double x : {0.1, 2.0, 9.0}) {
    EXPECT_NEAR(log_density(t, 1.0, x), log_density(base, 1.5, x), 1e-12);
  }
  const auto n = models::tilt(models::normal(), -1.0);
  EXPECT_NEAR(log_density(n, 0.2, 0.7), log_density(models::normal(), -0.8, 0.7), 1e-12);
}

TEST(Models, ReflectMirrorsTheLaw) {
  const auto g = models::gamma(2.0);
  const auto r = models::reflect(g);
  EXPECT_EQ(r.support.orientation, Orientation::lower_unbounded);
  EXPECT_EQ(r.support.upper(), 0.0);
  for (double x : {0.5, 3.0}) EXPECT_NEAR(log_density(r, 0.8, -x), log_density(g, 0.8, x), 1e-13);
}

TEST(Models, ReorientNegatesTheParameter) {
  const auto n = models::normal(1.5);
  const auto r = models::reorient(n);
  EXPECT_EQ(r.support.orientation, Orientation::upper_unbounded);
  for (double x : {-2.0, 0.0, 3.0}) EXPECT_NEAR(log_density(r, -0.4, x), log_density(n, 0.4, x), 1e-13);
}

TEST(Models, TruncatingNormalGivesTruncatedNormal) {
  const auto t = models::truncate(models::normal(), 1.0);
  EXPECT_EQ(t.name, "truncnormal:sigma=1,b=1");
  const double theta = 0.4;
  for (double x : {-2.0, 0.0, 0.9}) {
    const long double want = std::log(oracle::normal_pdf(x - theta) / oracle::normal_cdf(1.0L - theta));
    EXPECT_NEAR(log_density(t, theta, x), static_cast<double>(want), 1e-12);
  }
}

TEST(Models, TruncatingAShiftedModelIsNumericalButNormalised) {
  const auto t = models::truncate(models::tilt(models::gamma(2.0), 0.5), 2.0);
  EXPECT_NEAR(static_cast<double>(total_mass(t, 1.0)), 1.0, 1e-10);
  const auto xs = sample(t, 1.0, 2000, 5);
  EXPECT_TRUE(std::all_of(xs.begin(), xs.end(), [](double x) { return x > 2.0; }));
}

TEST(Models, SufficientStatisticOfNormalAndGamma) {
  const auto n4 = models::sufficient_statistic(models::normal(), 4);
  EXPECT_EQ(n4.name, "normal:sigma=2");
  // T ~ N(4 theta, 4)
  EXPECT_NEAR(model_mean(n4, 0.5), 2.0, 1e-12);
  const auto g = models::sufficient_statistic(models::gamma(2.0), 3);
  EXPECT_EQ(g.name, "gamma:alpha=6");
  const auto ig = models::sufficient_statistic(models::inverse_gaussian(1.0), 2);
  // T/n ~ IG(mu, n lambda), so T ~ IG(n mu, n^2 lambda); theta' is unchanged.
  EXPECT_EQ(ig.name, "invgauss:lambda=4");
  EXPECT_NEAR(model_mean(ig, 0.5), 2 * model_mean(models::inverse_gaussian(1.0), 0.5), 1e-12);
}

TEST(Models, SamplingIsDeterministicPerSeed) {
  for (const auto& e : models::catalog()) {
    const double theta = thetas_for(e.example)[1];
    const auto a = sample(e.example, theta, 1000, 99);
    const auto b = sample(e.example, theta, 1000, 99);
    const auto c = sample(e.example, theta, 1000, 100);
    EXPECT_EQ(a, b) << e.id;
    EXPECT_NE(a, c) << e.id;
  }
}

TEST(Models, NormalSamplerMatchesCdf) {
  const auto xs = sample(models::normal(2.0), 0.25, 200'000, 1);
  expect_cdf(xs, [](long double x) { return oracle::normal_cdf((x - 1.0L) / 2.0L); }, {-3, -1, 0, 1, 2.5, 5});
}

TEST(Models, GammaSamplerMatchesCdf) {
  for (double alpha : {0.4, 1.0, 3.5}) {
    const double rate = 2.0;
    const auto xs = sample(models::gamma(alpha), rate, 200'000, 2);
    const auto cdf = [&](long double x) {
      // t = s^2 substitution keeps alpha < 1 integrable without a singularity.
      return oracle::integrate(
                 [&](long double s) {
                   return 2 * s * std::pow(rate * s * s, alpha - 1) * rate * std::exp(-rate * s * s);
                 },
                 0, std::sqrt(x)) /
             std::exp(std::lgamma(static_cast<long double>(alpha)));
    };
    expect_cdf(xs, cdf, {0.05, 0.3, 1.0, 2.0, 4.0});
  }
}

TEST(Models, InverseGaussianSamplerMatchesCdf) {
  const double lambda = 2.0, mu = 0.8;
  const auto xs = sample(models::inverse_gaussian(lambda), models::inverse_gaussian_theta(mu, lambda), 200'000, 3);
  const auto cdf = [&](long double x) { return oracle::invgauss_cdf(x, mu, lambda); };
  std::vector<double> at;
  for (double p : {0.05, 0.25, 0.5, 0.75, 0.95, 0.999}) {
    at.push_back(static_cast<double>(oracle::quantile(cdf, p, 1e-9L, 100.0L)));
  }
  expect_cdf(xs, cdf, at);
}

TEST(Models, TruncatedSamplersMatchCdf) {
  const double theta = 1.5, b = 0.0;
  const auto xs = sample(models::truncated_normal(1.0, b), theta, 200'000, 4);
  const long double mass = oracle::normal_cdf(b - theta);
  expect_cdf(xs, [&](long double x) { return oracle::normal_cdf(x - theta) / mass; }, {-4, -3, -2, -1, -0.2});

  const double rate = 0.5, lo = 3.0;
  const auto gs = sample(models::truncated_gamma(2.0, lo), rate, 200'000, 5);
  // Gamma(2, rate) survival: e^{-r x}(1 + r x)
  const auto sf = [&](long double x) { return std::exp(-rate * x) * (1 + rate * x); };
  expect_cdf(gs, [&](long double x) { return 1 - sf(x) / sf(lo); }, {3.2, 4, 6, 10});
}

TEST(Models, ParseModelGrammar) {
  EXPECT_EQ(models::parse_model("normal").name, "normal");
  EXPECT_EQ(models::parse_model("normal:sigma=0.5").name, "normal:sigma=0.5");
  EXPECT_EQ(models::parse_model("gamma:alpha=2").name, "gamma:alpha=2");
  EXPECT_EQ(models::parse_model("gamma:alpha=2,trunc_lo=1").support.lower(), 1.0);
  EXPECT_EQ(models::parse_model("invgauss:lambda=3").name, "invgauss:lambda=3");
  EXPECT_EQ(models::parse_model("truncnormal:b=0").name, "truncnormal:sigma=1,b=0");
  EXPECT_THROW(models::parse_model("poisson"), ParseError);
  EXPECT_THROW(models::parse_model("gamma"), ParseError);
  EXPECT_THROW(models::parse_model("gamma:alpha=-2"), ParseError);
  EXPECT_THROW(models::parse_model("gamma:alpha=x"), ParseError);
  EXPECT_THROW(models::parse_model("normal:mu=1"), ParseError);
  try {
    models::parse_model("gamma:alpha=2,beta=1");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.key(), "beta");
  }
}
