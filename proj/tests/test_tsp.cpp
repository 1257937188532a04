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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles/brute_force.hpp"
#include "stsp/error.hpp"
#include "stsp/tsp.hpp"

using namespace stsp;

namespace {

std::vector<oracle::Point> points(const TspInstance& inst) {
  std::vector<oracle::Point> pts;
  for (const City& c : inst.coords()) pts.emplace_back(c.x, c.y);
  return pts;
}

}  // namespace

TEST(TspInstance, CanonicalOrderPutsNearestToOneOneFirst) {
  TspInstance inst = TspInstance::from_coords({{0.1, 0.1}, {0.9, 0.8}, {0.5, 0.5}});
  EXPECT_EQ(inst[0], (City{0.9, 0.8}));
  EXPECT_EQ(inst[2], (City{0.1, 0.1}));
  EXPECT_TRUE(is_canonical(inst.coords()));
}

TEST(TspInstance, CanonicalOrderIsIdempotent) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<City> c(8);
    for (City& p : c) p = {unif(rng), unif(rng)};
    if (trial % 3 == 0) c[3] = c[5];  // exact duplicates tie-break by index
    const auto once = canonical_order(c);
    EXPECT_EQ(canonical_order(once), once);
    EXPECT_TRUE(is_canonical(once));
  }
}

TEST(TspInstance, RejectsBadInput) {
  EXPECT_THROW(TspInstance::from_coords({{0, 0}, {1, 1}}), InvalidInstanceError);
  EXPECT_THROW(TspInstance::from_coords({{0, 0}, {1, 1}, {1.5, 0}}), InvalidInstanceError);
  EXPECT_THROW(TspInstance::from_coords({{0, 0}, {1, 1}, {NAN, 0}}), InvalidInstanceError);
  EXPECT_THROW(TspInstance::from_canonical({{0, 0}, {1, 1}, {0.5, 0.5}}),
               InvalidInstanceError);
}

TEST(TspInstance, GenerationIsSeeded) {
  EXPECT_EQ(generate_instances(5, 10, 42), generate_instances(5, 10, 42));
  EXPECT_NE(generate_instances(5, 10, 42), generate_instances(5, 10, 43));
  for (const auto& inst : generate_instances(20, 10, 1)) {
    EXPECT_EQ(inst.size(), 10u);
    EXPECT_TRUE(is_canonical(inst.coords()));
  }
}

TEST(TourLength, MatchesIndependentSummation) {
  std::mt19937_64 rng(11);
  for (const auto& inst : generate_instances(50, 12, 3)) {
    std::vector<int> order(12);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin() + 1, order.end(), rng);
    EXPECT_NEAR(tour_length(inst, order), oracle::cycle_length(points(inst), order), 1e-12);
  }
}

TEST(TourLength, UnitSquareCornersIsFour) {
  TspInstance inst = TspInstance::from_coords({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  EXPECT_DOUBLE_EQ(solve_exact(inst).length, 4.0);
}

TEST(TourLength, RightTriangle) {
  TspInstance inst = TspInstance::from_coords({{0, 0}, {1, 0}, {0, 1}});
  EXPECT_NEAR(solve_exact(inst).length, 2.0 + std::sqrt(2.0), 1e-12);
}

TEST(TourLength, CollinearCities) {
  TspInstance inst = TspInstance::from_coords({{0, 0}, {0.5, 0}, {1, 0}});
  EXPECT_NEAR(solve_exact(inst).length, 2.0, 1e-12);
}

TEST(ValidatePermutation, RejectsNonPermutations) {
  EXPECT_NO_THROW(validate_permutation(std::vector<int>{0, 2, 1}, 3));
  EXPECT_THROW(validate_permutation(std::vector<int>{0, 1}, 3), InvalidTourError);
  EXPECT_THROW(validate_permutation(std::vector<int>{0, 1, 1}, 3), InvalidTourError);
  EXPECT_THROW(validate_permutation(std::vector<int>{0, 1, 3}, 3), InvalidTourError);
  EXPECT_THROW(validate_permutation(std::vector<int>{0, -1, 2}, 3), InvalidTourError);
}

// Held-Karp against exhaustive enumeration, both for the length and for the
// canonical orientation of the optimal cycle.
TEST(SolveExact, MatchesBruteForce) {
  for (std::size_t n : {3u, 4u, 5u, 6u, 7u, 8u}) {
    for (const auto& inst : generate_instances(25, n, 100 + n)) {
      const auto pts = points(inst);
      const oracle::BruteResult brute = oracle::brute_force_min(
          n, true, [&](const std::vector<int>& o) { return oracle::cycle_length(pts, o); });
      const Tour hk = solve_exact(inst);
      EXPECT_NEAR(hk.length, brute.length, 1e-9) << "n=" << n;
      EXPECT_EQ(hk.order, brute.order) << "n=" << n;
      EXPECT_LT(hk.order[1], hk.order[n - 1]);
    }
  }
}

TEST(SolveExact, EnumerationCountsCycles) {
  // (n-1)!/2 distinct cycles through city 0.
  const auto r = oracle::brute_force_min(6, true, [](const std::vector<int>&) { return 0.0; });
  EXPECT_EQ(r.tours, 60u);
}

TEST(SolveExact, RefusesLargeInstances) {
  const auto big = generate_instances(1, kMaxExactCities + 1, 5);
  EXPECT_THROW(solve_exact(big[0]), InstanceTooLargeError);
}

TEST(SolveExact, NoTourBeatsTheOptimum) {
  std::mt19937_64 rng(5);
  for (const auto& inst : generate_instances(20, 10, 9)) {
    const double best = solve_exact(inst).length;
    std::vector<int> order(10);
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < 200; ++k) {
      std::shuffle(order.begin() + 1, order.end(), rng);
      EXPECT_GE(tour_length(inst, order), best - 1e-12);
    }
  }
}

TEST(NearestNeighbor, IsAValidTourNoShorterThanOptimum) {
  for (const auto& inst : generate_instances(20, 9, 8)) {
    const Tour t = nearest_neighbor(inst, 0);
    EXPECT_EQ(t.order.front(), 0);
    EXPECT_NO_THROW(validate_permutation(t.order, 9));
    EXPECT_NEAR(t.length, tour_length(inst, t.order), 1e-12);
    EXPECT_GE(t.length, solve_exact(inst).length - 1e-12);
  }
  const auto inst = generate_instances(1, 5, 1)[0];
  EXPECT_THROW(nearest_neighbor(inst, 5), InvalidTourError);
}

TEST(NearestNeighbor, SquareVisitsAdjacentCorners) {
  TspInstance inst = TspInstance::from_coords({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  EXPECT_DOUBLE_EQ(nearest_neighbor(inst, 0).length, 4.0);
}

TEST(TourLength, InvariantUnderReversalAndRotation) {
  for (const auto& inst : generate_instances(30, 11, 21)) {
    std::vector<int> order = nearest_neighbor(inst, 0).order;
    const double base = tour_length(inst, order);
    std::vector<int> reversed(order.rbegin(), order.rend());
    EXPECT_NEAR(tour_length(inst, reversed), base, 1e-12);
    for (int k = 1; k < 11; k += 3) {
      std::vector<int> rotated = order;
      std::rotate(rotated.begin(), rotated.begin() + k, rotated.end());
      EXPECT_NEAR(tour_length(inst, rotated), base, 1e-12);
    }
  }
}

TEST(TourLength, ExactBelowNearestNeighborBelowBound) {
  for (const auto& inst : generate_instances(40, 10, 22)) {
    const double exact = solve_exact(inst).length;
    const double nn = nearest_neighbor(inst, 0).length;
    EXPECT_LE(exact, nn + 1e-12);  // same cycle, other orientation, differs in the last bits
    EXPECT_LE(nn, 10 * std::sqrt(2.0));
  }
}
