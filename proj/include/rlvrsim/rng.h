// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rlvrsim {

/// Seedable, splittable random source with a platform-independent output
/// sequence. The engine is std::mt19937_64, whose sequence is fixed by the
/// standard; child streams are seeded through SplitMix64. The library's own
/// samplers are used instead of <random> distributions, whose outputs vary
/// between standard library implementations.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/splitmix64-split";

  explicit Rng(uint64_t seed);

  /// Independent child stream keyed by `stream`; does not advance this one.
  Rng Split(uint64_t stream) const;

  uint64_t NextU64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double Uniform01();
  /// Uniform integer in [0, n); n must be positive.
  uint64_t UniformIndex(uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  int64_t UniformInt(int64_t lo, int64_t hi);
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  double Normal();
  bool Bernoulli(double p) { return Uniform01() < p; }
  /// Index drawn with probability proportional to weights (non-negative, not all zero).
  size_t Categorical(std::span<const double> weights);

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[UniformIndex(i)]);
    }
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

uint64_t SplitMix64(uint64_t x);

}  // namespace rlvrsim
