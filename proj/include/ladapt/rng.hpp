/* Copyright 2026 The ladapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef LADAPT_RNG_HPP_
#define LADAPT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

namespace ladapt {

/// PCG32 (pcg_oneseq XSH-RR 64/32) pseudo-random generator.
///
/// All randomness in the library flows through this generator so that a
/// (seed, stream) pair reproduces the same byte-identical results on every
/// run. The stream selector provides statistically independent sequences
/// from one seed, which keeps unrelated parts of a training run (batch
/// shuffling, epsilon draws, weight init) from perturbing each other.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) {
    state_ = 0u;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = next_u32();
    std::uint64_t lo = next_u32();
    return (hi << 32u) | lo;
  }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11u) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. One value per call (the second
  /// Box-Muller output is discarded so every call consumes a fixed number
  /// of raw draws).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Unbiased integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n <= 1) return 0;
    std::uint64_t bound = n;
    std::uint64_t threshold = (~bound + 1u) % bound;  // 2^64 mod n
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
};

/// Fixed stream selectors. Each independent consumer of randomness inside a
/// training run owns one stream.
namespace rng_stream {
constexpr std::uint64_t kModelInit = 0x01;
constexpr std::uint64_t kSourceBatches = 0x02;
constexpr std::uint64_t kTargetBatches = 0x03;
constexpr std::uint64_t kCriticSource = 0x04;
constexpr std::uint64_t kCriticTarget = 0x05;
constexpr std::uint64_t kEpsilon = 0x06;
constexpr std::uint64_t kSplit = 0x07;
constexpr std::uint64_t kData = 0x08;
constexpr std::uint64_t kHeadBase = 0x100;  // + feature-layer index
}  // namespace rng_stream

}  // namespace ladapt

#endif  // LADAPT_RNG_HPP_
