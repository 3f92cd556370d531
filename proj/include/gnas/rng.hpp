#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

#include "gnas/util.hpp"

namespace gnas {

/// Seeded random source. Every consumer gets its own named substream derived
/// from one root seed, so adding a draw in one component does not shift the
/// streams of any other. All draws are implemented on top of the raw mt19937_64
/// word stream (no std::*_distribution), which keeps sequences identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_seed_(seed), engine_(mix64(seed)) {}

  /// Child stream keyed by (root seed, name).
  Rng substream(std::string_view name) const {
    return Rng(hash_combine(base_seed_, fnv1a64(name)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform01() { return u64_to_unit(next_u64()); }

  /// Unbiased uniform index in [0, n); rejection-sampled.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw RuntimeAbort("uniform_index: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % un;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return static_cast<std::size_t>(r % un);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t base_seed() const { return base_seed_; }

 private:
  std::uint64_t base_seed_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace gnas
