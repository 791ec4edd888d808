#pragma once

// Counter-based random stream built on the SplitMix64 finalizer.
//
// Draw i (1-based) of the stream with key K is mix64(mix64(K) + i * G) where
// G = 0x9E3779B97F4A7C15. Uniform doubles take the top 53 bits; normals use
// the cosine branch of Box-Muller on two consecutive draws. Integer outputs
// are bit-identical on every platform; normals depend only on std::log,
// std::sqrt and std::cos.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace imp {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent child key for a named sub-stream of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream + kGoldenGamma));
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(mix64(key)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGoldenGamma); }

  std::uint64_t counter() const { return counter_; }

  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    // (0, 1] keeps the logarithm finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// +1 or -1 with equal probability.
  double sign() { return (next_u64() >> 63) != 0 ? 1.0 : -1.0; }

  /// Uniform integer in [0, bound) by rejection, so there is no modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("CounterRng::below: bound must be positive");
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace imp
