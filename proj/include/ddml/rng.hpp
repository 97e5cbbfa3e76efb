#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ddml {

// Seedable 64-bit random stream. All distribution transforms are written out
// explicitly (instead of std::*_distribution) so that a fixed (seed, stream)
// pair replays bit-identically on any platform. Independent streams for the
// same seed are derived by mixing the stream id into the engine seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform over {0, ..., n-1} without modulo bias (Lemire's method).
  std::uint64_t uniform_index(std::uint64_t n);

  // Laplace(0, scale) via the inverse CDF -scale*sgn(u)*ln(1-2|u|), u~U(-1/2,1/2).
  double laplace(double scale);

  // Normal via Box-Muller; pairs are cached.
  double normal(double mean, double stddev);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ddml
