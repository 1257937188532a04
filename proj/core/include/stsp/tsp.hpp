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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stsp/rng.hpp"

namespace stsp {

struct City {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const City&) const = default;
};

/// Euclidean TSP instance in the unit square, stored in canonical order:
/// non-increasing x + y, ties by non-increasing x, then by original index.
/// City 0 is therefore the one nearest (1, 1) and is the fixed tour start.
class TspInstance {
 public:
  TspInstance() = default;

  /// Validates and canonicalises arbitrary coordinates.
  static TspInstance from_coords(std::vector<City> coords);
  /// Accepts coordinates that are already canonical; throws otherwise.
  static TspInstance from_canonical(std::vector<City> coords);

  std::size_t size() const noexcept { return coords_.size(); }
  const City& operator[](std::size_t i) const { return coords_[i]; }
  std::span<const City> coords() const noexcept { return coords_; }
  double distance(std::size_t i, std::size_t j) const;

  bool operator==(const TspInstance&) const = default;

 private:
  explicit TspInstance(std::vector<City> coords) : coords_(std::move(coords)) {}
  std::vector<City> coords_;
};

/// Stable canonical sort; idempotent.
std::vector<City> canonical_order(std::vector<City> coords);
bool is_canonical(std::span<const City> coords);

std::vector<TspInstance> generate_instances(std::size_t count, std::size_t n,
                                            std::uint64_t seed);
/// Draws from an existing stream; used by the trainer's per-batch streams.
std::vector<TspInstance> generate_instances(std::size_t count, std::size_t n,
                                            Rng& rng);

struct Tour {
  std::vector<int> order;
  double length = 0.0;
  bool operator==(const Tour&) const = default;
};

/// Throws InvalidTourError unless `order` is a permutation of 0..n-1.
void validate_permutation(std::span<const int> order, std::size_t n);

/// Closed-cycle Euclidean length, summed left to right over `order`.
double tour_length(const TspInstance& instance, std::span<const int> order);

inline constexpr std::size_t kMaxExactCities = 16;

/// Held-Karp optimum. The returned order starts at city 0 and is the
/// lexicographically smallest among exactly tied optima, so of the two
/// orientations of a cycle the one with order[1] < order[n-1] is returned.
Tour solve_exact(const TspInstance& instance);

/// Greedy nearest unvisited city; ties to the lowest index.
Tour nearest_neighbor(const TspInstance& instance, int start);

}  // namespace stsp
