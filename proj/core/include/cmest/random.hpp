#pragma once

#include <cstdint>
#include <random>

namespace cmest {

/// Seeded random source for all samplers.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// builds every variate from its raw bits with in-repo transformations, so a
/// given seed yields the same stream with any standard library. Not
/// thread-safe; give each thread its own instance via derive_seed().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform();

  /// Standard normal (Marsaglia polar method; the second variate of each
  /// accepted pair is kept for the next call).
  double normal();

  /// Standard exponential by inversion.
  double exponential();

  /// Gamma(shape, rate 1): Marsaglia-Tsang squeeze for shape >= 1, and the
  /// U^(1/shape) boost for shape < 1.
  double gamma(double shape);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer: a well-mixed child seed for stream `index` of
/// `base`. Used to give batches and grid points independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace cmest
