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

#include "stsp/tsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "stsp/error.hpp"

namespace stsp {
namespace {

void validate_coords(std::span<const City> coords) {
  if (coords.size() < 3) {
    throw InvalidInstanceError("instance needs at least 3 cities, got " +
                               std::to_string(coords.size()));
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const City& c = coords[i];
    if (!(c.x >= 0.0 && c.x <= 1.0 && c.y >= 0.0 && c.y <= 1.0)) {
      throw InvalidInstanceError("city " + std::to_string(i) +
                                 " lies outside the unit square");
    }
  }
}

// Strictly-before relation of the canonical order (ignoring original index).
bool canonical_before(const City& a, const City& b) {
  const double sa = a.x + a.y;
  const double sb = b.x + b.y;
  if (sa != sb) return sa > sb;
  return a.x > b.x;
}

}  // namespace

std::vector<City> canonical_order(std::vector<City> coords) {
  std::stable_sort(coords.begin(), coords.end(), canonical_before);
  return coords;
}

bool is_canonical(std::span<const City> coords) {
  for (std::size_t i = 1; i < coords.size(); ++i) {
    if (canonical_before(coords[i], coords[i - 1])) return false;
  }
  return true;
}

TspInstance TspInstance::from_coords(std::vector<City> coords) {
  validate_coords(coords);
  return TspInstance(canonical_order(std::move(coords)));
}

TspInstance TspInstance::from_canonical(std::vector<City> coords) {
  validate_coords(coords);
  if (!is_canonical(coords)) {
    throw InvalidInstanceError("coordinates are not in canonical order");
  }
  return TspInstance(std::move(coords));
}

double TspInstance::distance(std::size_t i, std::size_t j) const {
  const double dx = coords_[i].x - coords_[j].x;
  const double dy = coords_[i].y - coords_[j].y;
  return std::sqrt(dx * dx + dy * dy);
}

std::vector<TspInstance> generate_instances(std::size_t count, std::size_t n,
                                            Rng& rng) {
  if (n < 3) {
    throw InvalidInstanceError("instance needs at least 3 cities, got " +
                               std::to_string(n));
  }
  std::vector<TspInstance> out;
  out.reserve(count);
  std::vector<City> coords(n);
  for (std::size_t k = 0; k < count; ++k) {
    for (City& c : coords) {
      c.x = rng.uniform();
      c.y = rng.uniform();
    }
    out.push_back(TspInstance::from_coords(coords));
  }
  return out;
}

std::vector<TspInstance> generate_instances(std::size_t count, std::size_t n,
                                            std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "instances");
  return generate_instances(count, n, rng);
}

void validate_permutation(std::span<const int> order, std::size_t n) {
  if (order.size() != n) {
    throw InvalidTourError("tour visits " + std::to_string(order.size()) +
                           " cities, instance has " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (int c : order) {
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      throw InvalidTourError("city index " + std::to_string(c) + " out of range");
    }
    if (seen[static_cast<std::size_t>(c)]) {
      throw InvalidTourError("city " + std::to_string(c) + " visited twice");
    }
    seen[static_cast<std::size_t>(c)] = true;
  }
}

double tour_length(const TspInstance& instance, std::span<const int> order) {
  validate_permutation(order, instance.size());
  double total = 0.0;
  const std::size_t n = order.size();
  for (std::size_t i = 0; i < n; ++i) {
    total += instance.distance(static_cast<std::size_t>(order[i]),
                               static_cast<std::size_t>(order[(i + 1) % n]));
  }
  return total;
}

Tour solve_exact(const TspInstance& instance) {
  const std::size_t n = instance.size();
  if (n > kMaxExactCities) {
    throw InstanceTooLargeError(
        "exact solver supports at most " + std::to_string(kMaxExactCities) +
        " cities (got " + std::to_string(n) +
        "); supply reference tours or use a heuristic bound instead");
  }
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = instance.distance(i, j);
  }

  // cost_to_go[S * n + j]: cheapest way to start at j having visited S
  // (which contains 0 and j), cover the rest, and return to 0.
  const std::size_t full = (std::size_t{1} << n) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost_to_go((full + 1) * n, kInf);
  for (std::size_t j = 1; j < n; ++j) cost_to_go[full * n + j] = dist[j * n];

  auto step_cost = [&](std::size_t set, std::size_t j, std::size_t k) {
    return dist[j * n + k] + cost_to_go[(set | (std::size_t{1} << k)) * n + k];
  };

  for (std::size_t set = full - 1; set >= 1; --set) {
    if ((set & 1) == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if ((set & (std::size_t{1} << j)) == 0) continue;
      if (j == 0 && set != 1) continue;
      double best = kInf;
      for (std::size_t k = 1; k < n; ++k) {
        if (set & (std::size_t{1} << k)) continue;
        best = std::min(best, step_cost(set, j, k));
      }
      cost_to_go[set * n + j] = best;
    }
  }

  Tour tour;
  tour.order.reserve(n);
  tour.order.push_back(0);
  std::size_t set = 1;
  std::size_t current = 0;
  while (set != full) {
    const double target = cost_to_go[set * n + current];
    std::size_t chosen = n;
    for (std::size_t k = 1; k < n; ++k) {
      if (set & (std::size_t{1} << k)) continue;
      if (step_cost(set, current, k) == target) {
        chosen = k;
        break;
      }
    }
    if (chosen == n) throw Error("Held-Karp reconstruction failed");
    tour.order.push_back(static_cast<int>(chosen));
    set |= std::size_t{1} << chosen;
    current = chosen;
  }
  if (tour.order[1] > tour.order[n - 1]) {
    std::reverse(tour.order.begin() + 1, tour.order.end());
  }
  tour.length = tour_length(instance, tour.order);
  return tour;
}

Tour nearest_neighbor(const TspInstance& instance, int start) {
  const std::size_t n = instance.size();
  if (start < 0 || static_cast<std::size_t>(start) >= n) {
    throw InvalidTourError("start city " + std::to_string(start) + " out of range");
  }
  std::vector<bool> visited(n, false);
  Tour tour;
  tour.order.reserve(n);
  std::size_t current = static_cast<std::size_t>(start);
  visited[current] = true;
  tour.order.push_back(start);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (visited[k]) continue;
      const double d = instance.distance(current, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    visited[best] = true;
    tour.order.push_back(static_cast<int>(best));
    current = best;
  }
  tour.length = tour_length(instance, tour.order);
  return tour;
}

}  // namespace stsp
