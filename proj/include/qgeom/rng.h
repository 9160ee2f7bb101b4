#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qgeom {

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard; the distribution transforms below are hand-rolled because the
// std::*_distribution implementations differ across standard libraries,
// which would break replayability of seeded runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [0, hi).
  double uniform(double hi) { return uniform() * hi; }

  /// Standard normal via Box-Muller. Two engine draws per sample.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // modulo bias is < 2^-53 * n; irrelevant at the sizes used here
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qgeom
