#include <benchmark/benchmark.h>

#include <vector>

#include "cmest/estimator.hpp"
#include "cmest/numerics.hpp"
#include "cmest/quadrature.hpp"
#include "cmest/verify.hpp"

using namespace cmest;

static void BM_MillsRatio(benchmark::State& state) {
  double x = -5.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(numerics::mills_ratio(x));
    x = x > 30.0 ? -5.0 : x + 0.37;
  }
}
BENCHMARK(BM_MillsRatio);

static void BM_LogGamma(benchmark::State& state) {
  double a = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(numerics::log_gamma(a));
    a = a > 100.0 ? 0.1 : a + 0.77;
  }
}
BENCHMARK(BM_LogGamma);

static void BM_QuadratureGaussianTail(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(quadrature::integrate([](double x) { return -0.5 * x * x; }, 1.0, INFINITY));
  }
}
BENCHMARK(BM_QuadratureGaussianTail);

static void BM_Evaluate(benchmark::State& state, const char* model, const char* q, bool force) {
  EstimatorOptions o;
  o.force_quadrature = force;
  const auto spec = resolve(models::parse_model(model), qfunc::parse_q(q), {}, o);
  const double x = spec.source.support.orientation == Orientation::upper_unbounded ? 1.3 : 0.4;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(spec, x).value);
}
BENCHMARK_CAPTURE(BM_Evaluate, normal_recip_closed, "normal", "recip", false);
BENCHMARK_CAPTURE(BM_Evaluate, normal_recip_quadrature, "normal", "recip", true);
BENCHMARK_CAPTURE(BM_Evaluate, normal_window, "normal", "window:d1=0,d2=1", false);
BENCHMARK_CAPTURE(BM_Evaluate, invgauss_closed, "invgauss:lambda=1", "recip", false);
BENCHMARK_CAPTURE(BM_Evaluate, invgauss_quadrature, "invgauss:lambda=1", "recip", true);

static void BM_Sample(benchmark::State& state, const char* model, double theta) {
  const auto m = models::parse_model(model);
  Rng rng(1);
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    sample(m, theta, rng, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_CAPTURE(BM_Sample, normal, "normal", 1.0)->Arg(1 << 16);
BENCHMARK_CAPTURE(BM_Sample, gamma, "gamma:alpha=0.5", 2.0)->Arg(1 << 16);
BENCHMARK_CAPTURE(BM_Sample, invgauss, "invgauss:lambda=1", 0.5)->Arg(1 << 16);
BENCHMARK_CAPTURE(BM_Sample, truncnormal, "truncnormal:sigma=1,b=0", 0.5)->Arg(1 << 16);

static void BM_Certify(benchmark::State& state) {
  const auto spec = resolve(models::gamma(2.0), qfunc::reciprocal());
  for (auto _ : state) benchmark::DoNotOptimize(certify(spec, 0.5, 100'000, 1).z_score);
}
BENCHMARK(BM_Certify)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
