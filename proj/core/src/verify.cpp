#include "cmest/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <thread>

#include "cmest/errors.hpp"
#include "cmest/format.hpp"
#include "cmest/numerics.hpp"
#include "cmest/random.hpp"

namespace cmest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kChunk = 65'536;
constexpr std::size_t kMinDraws = 10'000;

// Welford accumulator with Chan et al.'s pairwise merge.
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    count += 1.0;
    const double d = v - mean;
    mean += d / count;
    m2 += d * (v - mean);
  }

  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double total = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / total;
    m2 += o.m2 + d * d * count * o.count / total;
    count = total;
  }

  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double std_error() const { return std::sqrt(variance() / count); }
};

// Runs fn(i) for i in [0, count) on a small worker pool. The first exception
// by index is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// n draws in chunks of kChunk, chunk c seeded with derive_seed(seed, c);
// fn(rng, count, acc) fills one chunk's accumulator. Chunks merge in order.
template <class Fn>
Moments chunked_moments(std::size_t n, std::uint64_t seed, Fn&& fn) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Moments> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    const std::size_t count = std::min(kChunk, n - c * kChunk);
    fn(rng, count, parts[c]);
  });
  Moments total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lo + hi);
}

McReport base_report(const EstimatorSpec& spec, double theta, std::size_t n, std::uint64_t seed) {
  McReport r;
  r.model_id = spec.model_id();
  r.q_id = spec.q_id();
  r.transform_id = spec.transform_id();
  r.theta = theta;
  r.n = n;
  r.seed = seed;
  r.target = target(spec, theta);
  return r;
}

void finish_z(McReport& r, double mean, double se, double z_max) {
  r.sample_mean = mean;
  r.std_error = se;
  r.z_score = se > 0.0 ? (mean - r.target) / se : (mean == r.target ? 0.0 : kInf);
  r.pass = std::abs(r.z_score) <= z_max;
}

double reduced_log_density(const ExpFamilyModel& m, double psi, double log_a, double y) {
  return m.log_h(y) + psi * y - log_a;
}

// Integral of delta(y) f(y) over (lo, hi) in reduced coordinates.
quadrature::QuadResult integrate_delta(const EstimatorSpec& spec, double psi, double lo, double hi) {
  const ExpFamilyModel& m = spec.reduced;
  const double log_a = m.log_partition(psi);
  const double mean = model_mean(m, psi);
  const double sd = std::sqrt(model_variance(m, psi));
  auto integrand = [&](double y) {
    const double lf = reduced_log_density(m, psi, log_a, y);
    if (!(lf > -kInf)) return -kInf;
    try {
      return evaluate_reduced(spec, y).log_value + lf;
    } catch (const ConvergenceError&) {
      // Far outside the bulk the inner integral may be out of reach of the
      // probe; the contribution there is negligible.
      if (std::abs(y - mean) > 40.0 * sd) return -kInf;
      throw;
    }
  };
  // Clip infinite ends where the integrand is negligible. Far out, log delta
  // and log f are huge and of opposite sign, and their sum is noise.
  const double anchor = std::clamp(mean, std::nextafter(lo, hi), std::nextafter(hi, lo));
  const double bulk = integrand(anchor);
  auto clip = [&](double dir) {
    double peak = bulk;
    for (int k = 0; k <= 24; ++k) {
      const double y = anchor + dir * sd * std::ldexp(1.0, k);
      const double v = integrand(y);
      peak = std::max(peak, v);
      if (k >= 2 && v < peak - 60.0) return y;
    }
    return dir * kInf;
  };
  if (std::isinf(lo)) lo = clip(-1.0);
  if (std::isinf(hi)) hi = clip(1.0);
  const auto r = quadrature::integrate(integrand, lo, hi, {1e-10, 1e-10});
  if (!r.converged) {
    throw ConvergenceError("expectation integral did not converge for " + spec.model_id() + ", " + spec.q_id(),
                           r.abs_error_bound);
  }
  return r;
}

McReport certify_z(const EstimatorSpec& spec, double theta, std::size_t n, std::uint64_t seed,
                   const CertifyOptions& options, double cut) {
  McReport r = base_report(spec, theta, n, seed);
  const double psi = spec.param(theta);
  double tail = 0.0;
  if (cut > -kInf) tail = integrate_delta(spec, psi, -kInf, cut).value;
  const Moments acc = chunked_moments(n, seed, [&](Rng& rng, std::size_t count, Moments& out) {
    std::vector<double> ys(count);
    sample(spec.reduced, psi, rng, ys);
    for (double y : ys) out.add(y < cut ? 0.0 : evaluate_reduced(spec, y).value);
  });
  finish_z(r, tail + acc.mean, acc.std_error(), options.z_max);
  return r;
}

}  // namespace

TailProbe probe_tail(const EstimatorSpec& spec, double theta) {
  check_theta(spec, theta);
  const ExpFamilyModel& m = spec.reduced;
  const double psi = spec.param(theta);
  const double mean = model_mean(m, psi);
  const double sd = std::sqrt(model_variance(m, psi));
  const double log_a = m.log_partition(psi);
  TailProbe probe;
  for (int k = 0; k <= 6; ++k) {
    const double y = mean - sd * (2.0 + std::ldexp(1.0, k));
    if (!m.support.contains(y)) break;
    const double v = 2.0 * evaluate_reduced(spec, y).log_value + reduced_log_density(m, psi, log_a, y);
    probe.points.emplace_back(y, v);
  }
  const auto& p = probe.points;
  const std::size_t k = p.size();
  probe.heavy_tailed = k >= 3 && p[k - 1].second > p[k - 2].second && p[k - 2].second > p[k - 3].second;
  return probe;
}

McReport certify(const EstimatorSpec& spec, double theta, std::size_t n, std::uint64_t seed,
                 const CertifyOptions& options) {
  check_theta(spec, theta);
  if (n < kMinDraws) throw DomainError("certify: n must be at least 10000");
  if (!(options.z_max > 0.0)) throw DomainError("certify: z_max must be positive");
  const auto start = std::chrono::steady_clock::now();

  CertifyMode mode = options.mode;
  bool heavy = false;
  if (mode == CertifyMode::automatic || mode == CertifyMode::tail_split) {
    heavy = probe_tail(spec, theta).heavy_tailed;
    if (mode == CertifyMode::automatic) {
      mode = heavy && spec.q.nonnegative ? CertifyMode::tail_split : CertifyMode::z_test;
    }
  }

  McReport r;
  switch (mode) {
    case CertifyMode::median_of_means: {
      r = base_report(spec, theta, n, seed);
      CertifyOptions mo = options;
      mo.mom_batch_size = std::max<std::size_t>(1, n / options.mom_batches);
      const MomResult mom = median_of_means_check(spec, theta, seed, mo);
      // Expressed on the z scale: |z| <= z_max exactly when the median lies
      // inside the pilot bracket.
      const double center = 0.5 * (mom.bracket_lo + mom.bracket_hi);
      const double half = 0.5 * (mom.bracket_hi - mom.bracket_lo);
      r.sample_mean = mom.estimate;
      r.std_error = half / options.z_max;
      r.z_score = r.std_error > 0.0 ? (mom.estimate - center) / r.std_error : 0.0;
      r.pass = mom.inside;
      r.method = "median_of_means";
      break;
    }
    case CertifyMode::tail_split: {
      if (!spec.q.nonnegative) throw DomainError("certify: tail_split needs a q with f >= 0");
      const double psi = spec.param(theta);
      const double cut =
          model_mean(spec.reduced, psi) - options.tail_cut_sd * std::sqrt(model_variance(spec.reduced, psi));
      r = certify_z(spec, theta, n, seed, options, cut);
      r.method = "tail_split";
      break;
    }
    default:
      r = certify_z(spec, theta, n, seed, options, -kInf);
      r.method = "z_test";
      break;
  }
  r.heavy_tailed = heavy;
  if (options.record_timing) {
    r.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                         .count();
  }
  return r;
}

double median_of_means(const EstimatorSpec& spec, double theta, std::size_t batches, std::size_t batch_size,
                       std::uint64_t seed) {
  check_theta(spec, theta);
  if (batches == 0 || batch_size == 0) throw DomainError("median_of_means: empty batches");
  const double psi = spec.param(theta);
  std::vector<double> means(batches);
  parallel_for(batches, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<double> ys(batch_size);
    sample(spec.reduced, psi, rng, ys);
    double s = 0.0;
    for (double y : ys) s += evaluate_reduced(spec, y).value;
    means[b] = s / static_cast<double>(batch_size);
  });
  return median(std::move(means));
}

MomResult median_of_means_check(const EstimatorSpec& spec, double theta, std::uint64_t seed,
                                const CertifyOptions& options) {
  if (options.pilot_reps < 2) throw DomainError("median_of_means_check: need at least two pilot runs");
  MomResult out;
  for (std::size_t r = 0; r < options.pilot_reps; ++r) {
    out.pilot.push_back(median_of_means(spec, theta, options.mom_batches, options.mom_batch_size,
                                        derive_seed(options.pilot_seed, r)));
  }
  const auto [lo, hi] = std::minmax_element(out.pilot.begin(), out.pilot.end());
  const double widen = 0.5 * (*hi - *lo);
  out.bracket_lo = *lo - widen;
  out.bracket_hi = *hi + widen;
  out.estimate = median_of_means(spec, theta, options.mom_batches, options.mom_batch_size, seed);
  out.inside = out.estimate >= out.bracket_lo && out.estimate <= out.bracket_hi;
  return out;
}

std::size_t CampaignResult::pass() const {
  return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.pass; }));
}

std::size_t CampaignResult::fail() const { return reports.size() - pass() + errors.size(); }

CampaignResult certify_grid(const EstimatorSpec& spec, const std::vector<double>& theta_grid, std::size_t n,
                            std::uint64_t base_seed, const CertifyOptions& options) {
  if (theta_grid.empty()) throw DomainError("certify_grid: empty theta grid");
  CampaignResult out;
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    try {
      out.reports.push_back(certify(spec, theta_grid[i], n, base_seed + i, options));
    } catch (const std::exception& e) {
      out.errors.push_back({i, theta_grid[i], e.what()});
    }
  }
  if (options.record_timing) out.timestamp = utc_timestamp();
  return out;
}

void merge_campaign(CampaignResult& into, const CampaignResult& part) {
  const std::size_t offset = into.reports.size() + into.errors.size();
  into.reports.insert(into.reports.end(), part.reports.begin(), part.reports.end());
  for (auto e : part.errors) {
    e.index += offset;
    into.errors.push_back(std::move(e));
  }
  if (!into.timestamp) into.timestamp = part.timestamp;
}

quadrature::QuadResult expectation_by_quadrature(const EstimatorSpec& spec, double theta) {
  check_theta(spec, theta);
  if (!spec.q.nonnegative) throw DomainError("expectation_by_quadrature: q must have f >= 0");
  const ExpFamilyModel& m = spec.reduced;
  return integrate_delta(spec, spec.param(theta), m.support.lower(), m.support.upper());
}

McReport moment_check(const ExpFamilyModel& model, double theta, std::size_t n, std::uint64_t seed,
                      double z_max) {
  if (n == 0) throw DomainError("moment_check: n must be >= 1");
  McReport r;
  r.model_id = model.name;
  r.q_id = "mean";
  r.transform_id = "identity";
  r.theta = theta;
  r.n = n;
  r.seed = seed;
  r.target = model_mean(model, theta);
  r.method = "moment";
  const Moments acc = chunked_moments(n, seed, [&](Rng& rng, std::size_t count, Moments& out) {
    std::vector<double> xs(count);
    sample(model, theta, rng, xs);
    for (double x : xs) out.add(x);
  });
  finish_z(r, acc.mean, acc.std_error(), z_max);
  return r;
}

McReport certify_ratio_independent(double mu1, double mu2, double tau1, double tau2, std::size_t n1,
                                   std::size_t n2, std::size_t reps, std::uint64_t seed, double z_max) {
  if (!(mu2 > 0.0)) throw DomainError("ratio: mu2 must be positive");
  if (n1 == 0 || n2 == 0 || reps == 0) throw DomainError("ratio: sample sizes must be >= 1");
  McReport r;
  r.model_id = "normal_pair:tau1=" + format_number(tau1) + ",tau2=" + format_number(tau2) +
               ",n1=" + std::to_string(n1) + ",n2=" + std::to_string(n2);
  r.q_id = "ratio";
  r.transform_id = "identity";
  r.theta = mu1 / mu2;
  r.n = reps;
  r.seed = seed;
  r.target = mu1 / mu2;
  r.method = "z_test";
  const Moments acc = chunked_moments(reps, seed, [&](Rng& rng, std::size_t count, Moments& out) {
    std::vector<double> z1(n1), z2(n2);
    for (std::size_t i = 0; i < count; ++i) {
      for (auto& v : z1) v = mu1 + tau1 * rng.normal();
      for (auto& v : z2) v = mu2 + tau2 * rng.normal();
      out.add(estimate_ratio_independent(z1, z2, tau1, tau2));
    }
  });
  finish_z(r, acc.mean, acc.std_error(), z_max);
  return r;
}

McReport certify_ratio_bivariate(double mu1, double mu2, double sigma1, double sigma2, double rho,
                                 std::size_t reps, std::uint64_t seed, double z_max) {
  if (!(mu2 > 0.0)) throw DomainError("ratio: mu2 must be positive");
  if (!(std::abs(rho) <= 1.0)) throw DomainError("ratio: |rho| must be <= 1");
  if (reps == 0) throw DomainError("ratio: reps must be >= 1");
  McReport r;
  r.model_id = "bivariate_normal:sigma1=" + format_number(sigma1) + ",sigma2=" + format_number(sigma2) +
               ",rho=" + format_number(rho);
  r.q_id = "ratio";
  r.transform_id = "identity";
  r.theta = mu1 / mu2;
  r.n = reps;
  r.seed = seed;
  r.target = mu1 / mu2;
  r.method = "z_test";
  const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const Moments acc = chunked_moments(reps, seed, [&](Rng& rng, std::size_t count, Moments& out) {
    for (std::size_t i = 0; i < count; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      const double y1 = mu1 + sigma1 * z1;
      const double y2 = mu2 + sigma2 * (rho * z1 + c * z2);
      out.add(estimate_ratio_bivariate(y1, y2, sigma1, sigma2, rho));
    }
  });
  finish_z(r, acc.mean, acc.std_error(), z_max);
  return r;
}

double divergence_log_g(double theta, double x) {
  return numerics::kLogSqrt2Pi - 0.5 * theta * theta + 2.0 * numerics::std_normal_log_sf(x) + theta * x +
         0.5 * x * x;
}

DivergenceReport divergence_demo(double theta, const DivergenceOptions& options) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw DomainError("divergence demo: theta must be positive, got " + format_number(theta));
  }
  if (options.streams == 0) throw DomainError("divergence demo: need at least one stream");
  DivergenceReport rep;
  rep.theta = theta;
  rep.seed = options.seed;

  std::vector<double> grid = options.x_grid;
  if (grid.empty()) {
    for (int i = -24; i <= 8; ++i) grid.push_back(0.5 * i);
  }
  std::sort(grid.begin(), grid.end());
  for (double x : grid) {
    const double lg = divergence_log_g(theta, x);
    rep.g_values.push_back({x, lg, std::exp(lg)});
  }
  std::size_t i = 0;
  while (i + 1 < rep.g_values.size() && rep.g_values[i].log_g > rep.g_values[i + 1].log_g) ++i;
  rep.increasing_below = rep.g_values.empty() ? 0.0 : rep.g_values[i].x;

  // log g is decreasing on (-inf, -theta]: its derivative is
  // x + theta - 2/R(x) < 0 there. Bisect each level on that branch.
  for (double level : options.thresholds) {
    const double target = std::log(level);
    double right = -theta;
    if (divergence_log_g(theta, right) >= target) {
      rep.threshold_crossings.push_back({level, right});
      continue;
    }
    double step = 1.0;
    double left = right - step;
    while (divergence_log_g(theta, left) < target) {
      right = left;
      step *= 2.0;
      left = right - step;
    }
    for (int it = 0; it < 200 && right - left > 1e-13 * std::max(1.0, std::abs(left)); ++it) {
      const double mid = 0.5 * (left + right);
      (divergence_log_g(theta, mid) >= target ? left : right) = mid;
    }
    rep.threshold_crossings.push_back({level, right});
  }

  std::vector<std::size_t> schedule = options.n_schedule;
  std::sort(schedule.begin(), schedule.end());
  if (!schedule.empty()) {
    std::vector<std::vector<double>> per_stream(options.streams);
    parallel_for(options.streams, [&](std::size_t s) {
      Rng rng(derive_seed(options.seed, s));
      double sum = 0.0;
      std::size_t drawn = 0;
      for (std::size_t target_n : schedule) {
        for (; drawn < target_n; ++drawn) {
          const double r = numerics::mills_ratio(theta + rng.normal());
          sum += r * r;
        }
        per_stream[s].push_back(sum / static_cast<double>(target_n));
      }
    });
    for (std::size_t k = 0; k < schedule.size(); ++k) {
      MomentSnapshot snap;
      snap.n = schedule[k];
      for (const auto& v : per_stream) snap.per_stream.push_back(v[k]);
      snap.second_moment = median(snap.per_stream);
      rep.running_second_moment.push_back(std::move(snap));
    }
  }
  rep.second_moment_nondecreasing = true;
  for (std::size_t k = 1; k < rep.running_second_moment.size(); ++k) {
    if (rep.running_second_moment[k].second_moment < rep.running_second_moment[k - 1].second_moment) {
      rep.second_moment_nondecreasing = false;
    }
  }
  return rep;
}

NonexistenceNote nonexistence_note(double lo, double hi) {
  if (!(lo < 0.0 && 0.0 < hi)) {
    throw DomainError("nonexistence note: the interval (" + format_number(lo) + ", " + format_number(hi) +
                      ") must contain 0 in its interior");
  }
  NonexistenceNote note;
  note.lo = lo;
  note.hi = hi;
  note.statement =
      "For the N(theta, 1) model with theta ranging over (" + format_number(lo) + ", " + format_number(hi) +
      "), no estimator is unbiased for 1/theta: the expectation of any estimator with finite mean is analytic "
      "in theta, while 1/theta has a pole at 0.";
  note.evidence =
      "Restricted to theta > 0 the unbiased estimator R(X) exists but has infinite variance; run the divergence "
      "demo to see E[R(X)^2] diverge.";
  return note;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace cmest
