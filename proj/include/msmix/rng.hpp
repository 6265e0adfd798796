// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "msmix/error.hpp"

namespace msmix {

/// Counter-based generator: the n-th draw is a pure function of (seed, n).
///
/// Each output is the SplitMix64 finalizer applied to seed + n * golden-gamma,
/// which gives identical streams on every platform and compiler, unlike the
/// distributions in <random>. All distributions below are built on top of it.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    if (n == 0)
      throw ValueError("Rng::index requires n > 0");
    // 128-bit multiply-shift avoids modulo bias for any n < 2^64.
    const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::size_t>(wide >> 64);
  }

  /// Standard normal via Box-Muller (one of the pair is discarded).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Gamma(shape, 1) by Marsaglia-Tsang; shapes below one use the boost
  /// Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape) {
    if (!(shape > 0.0))
      throw ValueError("gamma shape must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x)
        return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  /// Fisher-Yates permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i)
      p[i] = i;
    for (std::size_t i = n; i > 1; --i)
      std::swap(p[i - 1], p[index(i)]);
    return p;
  }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Symmetric Beta(alpha, alpha) draw as X / (X + Y) with X, Y ~ Gamma(alpha).
inline double sample_beta(Rng &rng, double alpha) {
  if (!(alpha > 0.0))
    throw ValueError("sample_beta: alpha must be positive");
  const double x = rng.gamma(alpha);
  const double y = rng.gamma(alpha);
  return x / (x + y);
}

/// Child seed for a subcomponent. Offsets are fixed so every stream is
/// reproducible from the single run seed.
enum class SeedStream : std::uint64_t {
  init = 1,
  shuffle = 2,
  augment = 3,
  occlusion = 4,
  split = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  return seed + 0x632BE59BD9B4E019ULL * static_cast<std::uint64_t>(stream);
}

} // namespace msmix
