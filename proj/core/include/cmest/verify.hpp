#pragma once

// Monte Carlo and quadrature certification of the estimators, and the
// divergence demonstration for the normal model.
//
// All Monte Carlo work is split into fixed-size chunks, each with its own
// seed derived from the run seed, and merged in chunk order; results depend
// only on (spec, theta, n, seed), never on the number of worker threads.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmest/estimator.hpp"
#include "cmest/quadrature.hpp"

namespace cmest {

struct McReport {
  std::string model_id;
  std::string q_id;
  std::string transform_id;
  double theta = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double sample_mean = 0.0;
  double std_error = 0.0;
  double target = 0.0;
  double z_score = 0.0;
  bool pass = false;
  /// Zero unless timing was requested, so that reports are reproducible.
  std::int64_t wall_time_ms = 0;

  /// How the certificate was formed: "z_test", "tail_split",
  /// "median_of_means" or "moment". Not part of the JSON schema.
  std::string method;
  /// The tail probe found E[delta^2] = inf.
  bool heavy_tailed = false;
};

enum class CertifyMode {
  automatic,        ///< tail probe decides between z_test and tail_split
  z_test,           ///< plain CLT test of the sample mean
  tail_split,       ///< lower tail by quadrature, the rest by Monte Carlo
  median_of_means,  ///< robust location check against a pilot bracket
};

struct CertifyOptions {
  double z_max = 4.0;
  CertifyMode mode = CertifyMode::automatic;
  bool record_timing = false;
  std::size_t mom_batches = 100;
  std::size_t mom_batch_size = 10'000;
  std::size_t pilot_reps = 20;
  std::uint64_t pilot_seed = 0x5eed5eedULL;
  /// The tail_split cut sits this many standard deviations below the mean.
  double tail_cut_sd = 3.0;
};

/// log(delta(y)^2 f(y)) sampled toward the unbounded tail of the reduced
/// model. heavy_tailed when it is still increasing at the far end, i.e. the
/// estimator has no second moment.
struct TailProbe {
  std::vector<std::pair<double, double>> points;
  bool heavy_tailed = false;
};
TailProbe probe_tail(const EstimatorSpec& spec, double theta);

/// Draws n observations at theta, applies the estimator, and tests the mean
/// against q(theta). Requires n >= 10^4; deterministic for a given seed.
McReport certify(const EstimatorSpec& spec, double theta, std::size_t n, std::uint64_t seed,
                 const CertifyOptions& options = {});

struct MomResult {
  double estimate = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  /// The pilot medians the bracket was built from.
  std::vector<double> pilot;
  bool inside = false;
};

/// Median over `batches` batch means of `batch_size` draws each.
double median_of_means(const EstimatorSpec& spec, double theta, std::size_t batches, std::size_t batch_size,
                       std::uint64_t seed);

/// Pilot bracket: median_of_means for `reps` derived pilot seeds; the
/// bracket is [min, max] widened by half its width on either side.
MomResult median_of_means_check(const EstimatorSpec& spec, double theta, std::uint64_t seed,
                                const CertifyOptions& options = {});

struct GridError {
  std::size_t index = 0;
  double theta = 0.0;
  std::string message;
};

struct CampaignResult {
  std::vector<McReport> reports;
  /// Grid points that raised instead of producing a report.
  std::vector<GridError> errors;
  std::optional<std::string> timestamp;

  std::size_t pass() const;
  /// Failed reports plus errors.
  std::size_t fail() const;
};

/// certify at each grid point with seed base_seed + index. Errors are
/// recorded and the remaining points still run.
CampaignResult certify_grid(const EstimatorSpec& spec, const std::vector<double>& theta_grid, std::size_t n,
                            std::uint64_t base_seed, const CertifyOptions& options = {});

/// Appends the reports and errors of `part` to `into`.
void merge_campaign(CampaignResult& into, const CampaignResult& part);

/// E_theta[delta(X)] by quadrature over the support, delta evaluated through
/// `spec` (resolve with force_quadrature for a nested quadrature). Throws
/// ConvergenceError if the outer integral fails and DomainError for a q that
/// is not nonnegative.
quadrature::QuadResult expectation_by_quadrature(const EstimatorSpec& spec, double theta);

/// Monte Carlo mean of X against E_theta[X] = A'(theta).
McReport moment_check(const ExpFamilyModel& model, double theta, std::size_t n, std::uint64_t seed,
                      double z_max = 4.0);

/// mu1/mu2 by the independent-samples ratio estimator over `reps` replications.
McReport certify_ratio_independent(double mu1, double mu2, double tau1, double tau2, std::size_t n1,
                                   std::size_t n2, std::size_t reps, std::uint64_t seed, double z_max = 4.0);

/// mu1/mu2 by the bivariate estimator over `reps` draws of (Y1, Y2).
McReport certify_ratio_bivariate(double mu1, double mu2, double sigma1, double sigma2, double rho,
                                 std::size_t reps, std::uint64_t seed, double z_max = 4.0);

// Divergence of E[delta^2] under N(theta, 1) with delta = R.

/// log g(x) = log sqrt(2 pi) - theta^2/2 + 2 log(1 - Phi(x)) + theta x + x^2/2,
/// the integrand of E_theta[R(X)^2]. It grows without bound as x -> -inf.
double divergence_log_g(double theta, double x);

struct DivergenceOptions {
  std::vector<double> x_grid;  ///< empty: -12, -11.5, ..., 4
  std::vector<std::size_t> n_schedule{10'000, 100'000, 1'000'000};
  std::vector<double> thresholds{1e3, 1e6, 1e9};
  std::uint64_t seed = 7;
  std::size_t streams = 16;
};

struct DivergencePoint {
  double x;
  double log_g;
  double g;
};

struct Crossing {
  double level;
  /// Largest x <= -theta with g(x) = level; g exceeds level for all smaller x.
  double x;
};

struct MomentSnapshot {
  std::size_t n;
  /// Median over streams of the running mean of delta^2.
  double second_moment;
  std::vector<double> per_stream;
};

struct DivergenceReport {
  double theta = 0.0;
  std::uint64_t seed = 0;
  std::vector<DivergencePoint> g_values;
  /// Grid point from which log g increases strictly toward smaller x.
  double increasing_below = 0.0;
  std::vector<Crossing> threshold_crossings;
  std::vector<MomentSnapshot> running_second_moment;
  bool second_moment_nondecreasing = false;
};

DivergenceReport divergence_demo(double theta, const DivergenceOptions& options = {});

struct NonexistenceNote {
  double lo;
  double hi;
  std::string statement;
  std::string evidence;
};

/// Record that no unbiased estimator of 1/theta exists when theta ranges
/// over an interval containing 0. Throws DomainError unless lo < 0 < hi.
NonexistenceNote nonexistence_note(double lo, double hi);

// JSON persistence.

/// {version, timestamp, reports: [...], summary {pass, fail}, errors: [...]}
std::string campaign_to_json(const CampaignResult& campaign);
/// Validates the schema; throws ParseError naming the offending field.
CampaignResult campaign_from_json(std::string_view text);
std::string divergence_to_json(const DivergenceReport& report);

/// Current UTC time as an ISO-8601 string.
std::string utc_timestamp();

}  // namespace cmest
