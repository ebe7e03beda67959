#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace graspgen {

/// Seeded random stream with portable draw semantics.
///
/// std::mt19937_64 has a fixed, standardized output sequence, but the
/// standard distributions do not. All draws here go through our own
/// mappings so that a given seed produces the same values on any
/// platform, which the reproducibility guarantees depend on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    // Rejection-free modulo is biased for huge n; all our n are tiny.
    return gen_() % n;
  }

  /// Standard normal via Box-Muller. Uses exactly two uniforms per draw so
  /// the stream advances deterministically regardless of call pattern.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // Guard the log against u1 == 0.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

/// Derives an independent child seed from a base seed and a stream tag.
/// splitmix64 finalizer; cheap and well mixed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace graspgen
