#pragma once

// Deterministic random number utilities.
//
// The standard <random> distributions are implementation-defined, so the same
// seed gives different streams under libstdc++ vs. libc++. Everything in this
// project that consumes randomness goes through the tiny generator below: the
// full stream is a pure function of the 64-bit seed on every platform.
//
// derive_stream(seed, index) yields decorrelated sub-streams; parallel loops
// (RANSAC iterations, per-scene work) each derive their own stream from the
// loop index so that results never depend on thread scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace distpose {

struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // Reject the final partial block so every residue is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit && limit != 0);
    return r % n;
  }

  /// Standard normal deviate via Box-Muller (fresh pair per call; the second
  /// value is discarded to keep the generator stateless beyond `state`).
  double normal() {
    double u1 = uniform();
    // Guard against log(0); shifts u1 into (0, 1].
    u1 = 1.0 - u1;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }
};

/// A decorrelated child stream for (seed, index); used to make parallel and
/// sequential execution produce identical results.
inline SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mixer(seed ^ (index * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
  return SplitMix64(mixer.next());
}

}  // namespace distpose
