// Copyright 2026 The stsp Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Deterministic named random streams.
//
// A stream is identified by (seed, name, index). Its engine is a
// std::mt19937_64 seeded with
//
//   splitmix64(seed ^ splitmix64(fnv1a64(name)) ^ splitmix64(index + phi))
//
// where phi = 0x9E3779B97F4A7C15. Uniform reals take the top 53 bits of one
// 64-bit draw, so streams reproduce bit-for-bit on every conforming
// platform. Instance generation, policy sampling and parameter
// initialisation each use their own stream names.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stsp {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline constexpr std::uint64_t stream_seed(std::uint64_t seed,
                                           std::string_view name,
                                           std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(fnv1a64(name)) ^
                    splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name,
                    std::uint64_t index = 0) {
    return Rng(stream_seed(seed, name, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stsp
