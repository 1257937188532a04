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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles/finite_difference.hpp"
#include "oracles/sinkhorn_reference.hpp"
#include "oracles/softmax_reference.hpp"
#include "stsp/decoder.hpp"
#include "stsp/error.hpp"

using namespace stsp;
using G = ad::Graph<double>;

namespace {

Tensor<double> random_scores(std::size_t n, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-scale, scale);
  Tensor<double> t({n, n});
  for (double& v : t.data) v = unif(rng);
  return t;
}

SinkhornConfig sinkhorn(double lambda, std::size_t iterations, bool log_domain = false) {
  SinkhornConfig c;
  c.lambda = lambda;
  c.iterations = iterations;
  c.log_domain = log_domain;
  return c;
}

}  // namespace

TEST(Sinkhorn, MatchesReferencePlan) {
  for (bool log_domain : {false, true}) {
    for (std::size_t iters : {1u, 3u, 10u}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 5 + seed % 7;
        const Tensor<double> scores = random_scores(n, 10.0, seed);
        G g(false);
        const Tensor<double> logits =
            sinkhorn_decode(g.constant(scores), sinkhorn(2.0, iters, log_domain)).value();
        const auto plan =
            oracle::sinkhorn_plan(scores.data, static_cast<int>(n), 2.0, static_cast<int>(iters));
        for (std::size_t i = 0; i < n * n; ++i) {
          EXPECT_NEAR(std::exp(logits[i]), static_cast<double>(plan[i]), 1e-8);
        }
      }
    }
  }
}

TEST(Sinkhorn, RowsSumToOneColumnsConverge) {
  const std::size_t n = 10;
  const Tensor<double> scores = random_scores(n, 10.0, 99);
  double previous = INFINITY;
  for (std::size_t iters : {1u, 2u, 5u, 20u, 100u}) {
    G g(false);
    const Tensor<double> logits = sinkhorn_decode(g.constant(scores), sinkhorn(0.5, iters)).value();
    double worst_col = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      double col = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row += std::exp(logits[i * n + j]);
        col += std::exp(logits[j * n + i]);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
      worst_col = std::max(worst_col, std::abs(col - 1.0));
    }
    EXPECT_LE(worst_col, previous);
    previous = worst_col;
  }
  EXPECT_LT(previous, 1e-9);
}

TEST(Sinkhorn, ZeroScoresGiveUniformPlan) {
  G g(false);
  const Tensor<double> logits =
      sinkhorn_decode(g.constant(Tensor<double>({6, 6}, 0.0)), sinkhorn(2.0, 4)).value();
  for (double l : logits.data) EXPECT_NEAR(l, std::log(1.0 / 6.0), 1e-14);
}

TEST(Sinkhorn, BatchedMatchesPerInstance) {
  const Tensor<double> a = random_scores(5, 10.0, 1);
  const Tensor<double> b = random_scores(5, 10.0, 2);
  Tensor<double> both({2, 5, 5});
  std::copy(a.data.begin(), a.data.end(), both.data.begin());
  std::copy(b.data.begin(), b.data.end(), both.data.begin() + 25);
  G g(false);
  const auto cfg = sinkhorn(2.0, 3);
  const Tensor<double> la = sinkhorn_decode(g.constant(a), cfg).value();
  const Tensor<double> lb = sinkhorn_decode(g.constant(b), cfg).value();
  const Tensor<double> lab = sinkhorn_decode(g.constant(both), cfg).value();
  EXPECT_EQ(lab.shape, (Shape{2, 5, 5}));
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(lab[i], la[i]);
    EXPECT_EQ(lab[25 + i], lb[i]);
  }
}

// A city whose column is prohibitively expensive everywhere drives the
// kernel column to underflow. The floors must keep the output finite and
// the rows normalised, and the events must be counted.
TEST(Sinkhorn, UnderflowingColumnStaysFinite) {
  const std::size_t n = 6;
  Tensor<double> scores = random_scores(n, 1.0, 4);
  for (std::size_t i = 0; i < n; ++i) scores[i * n + 2] = 10.0;
  G g(false);
  ad::FloorCounter warnings;
  const Tensor<double> logits =
      sinkhorn_decode(g.constant(scores), sinkhorn(100.0, 5), &warnings).value();
  EXPECT_GT(warnings.entries_floored, 0u);
  for (double l : logits.data) EXPECT_FALSE(std::isnan(l));

  G g2(false);
  const Tensor<double> stable =
      sinkhorn_decode(g2.constant(scores), sinkhorn(100.0, 5, true)).value();
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_TRUE(std::isfinite(stable[i * n + j]));
      row += std::exp(stable[i * n + j]);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
}

TEST(Sinkhorn, MaskedDiagonalHasNoSelfLoopMass) {
  G g(false);
  const Tensor<double> logits =
      sinkhorn_decode(g.constant(random_scores(5, 10.0, 8)), sinkhorn(2.0, 3), nullptr, true)
          .value();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(std::exp(logits[i * 5 + i]), 1e-20);
}

TEST(Sinkhorn, InvalidConfigsAreRejected) {
  EXPECT_THROW(sinkhorn(-1.0, 1).validate(), ConfigError);
  EXPECT_THROW(sinkhorn(0.0, 1).validate(), ConfigError);
  EXPECT_THROW(sinkhorn(1.0, 0).validate(), ConfigError);
  SinkhornConfig c;
  c.epsilon = 0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

// Gradient through the unrolled iterations against differences of the
// independent reference plan.
TEST(Sinkhorn, GradientMatchesReferenceDifferences) {
  for (bool log_domain : {false, true}) {
    for (std::size_t iters : {1u, 3u, 10u}) {
      const std::size_t n = 5;
      const Tensor<double> scores = random_scores(n, 3.0, iters);
      const Tensor<double> weights = random_scores(n, 1.0, 100 + iters);
      G g;
      ad::Var<double> x = g.variable(scores);
      ad::Var<double> logits = sinkhorn_decode(x, sinkhorn(2.0, iters, log_domain));
      g.backward(ad::reduce_sum(ad::mul(logits, g.constant(weights))));
      const Tensor<double> analytic = g.grad(x);

      auto f = [&](const std::vector<double>& c) {
        const auto plan = oracle::sinkhorn_plan(c, static_cast<int>(n), 2.0,
                                                static_cast<int>(iters));
        long double s = 0;
        for (std::size_t i = 0; i < c.size(); ++i) s += weights[i] * std::log(plan[i]);
        return static_cast<double>(s);
      };
      const auto numeric = oracle::gradient(f, scores.data, 1e-3);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        EXPECT_LE(oracle::rel_error(analytic[i], numeric[i]), 1e-6)
            << "iterations=" << iters << " entry " << i;
      }
    }
  }
}

TEST(Softmax, MatchesExtendedPrecision) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 4 + seed;
    const Tensor<double> scores = random_scores(n, 10.0, seed);
    G g(false);
    const Tensor<double> logits = softmax_decode(g.constant(scores)).value();
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> row(scores.data.begin() + i * n, scores.data.begin() + (i + 1) * n);
      const auto ref = oracle::log_softmax(row);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(logits[i * n + j], static_cast<double>(ref[j]), 1e-12);
      }
    }
  }
}

TEST(SplitHeatmaps, SplitsBatchAndExponentiates) {
  Tensor<double> logits({2, 3, 3}, std::log(1.0 / 3.0));
  logits[9] = 0.0;
  const auto maps = split_heatmaps(logits);
  ASSERT_EQ(maps.size(), 2u);
  EXPECT_EQ(maps[1].logits.shape, (Shape{3, 3}));
  EXPECT_DOUBLE_EQ(maps[1].probs[0], 1.0);
  EXPECT_NEAR(maps[0].probs[4], 1.0 / 3.0, 1e-15);
}

TEST(Entropy, KnownValues) {
  const std::size_t n = 4;
  EXPECT_NEAR(transport_entropy(Tensor<double>({n, n}, 1.0 / n)), n * std::log(double(n)), 1e-12);
  Tensor<double> perm({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) perm.at(i, (i + 1) % n) = 1.0;
  EXPECT_EQ(transport_entropy(perm), 0.0);
  perm[0] = -0.1;
  EXPECT_THROW(transport_entropy(perm), InvalidInputError);
}

TEST(HeatmapCsv, RoundTripAndMaskedDiagonal) {
  const auto path = std::filesystem::temp_directory_path() / "stsp_heatmap_test.csv";
  Tensor<double> p = random_scores(4, 1.0, 3);
  dump_heatmap(p, path);
  Tensor<double> back = read_heatmap_csv(path);
  ASSERT_EQ(back.shape, p.shape);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(back[i], p[i], 1e-8 * std::abs(p[i]));

  dump_heatmap(p, path, true);
  back = read_heatmap_csv(path);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(std::isnan(back.at(i, i)));
    EXPECT_FALSE(std::isnan(back.at(i, (i + 1) % 4)));
  }

  {
    std::ofstream out(path);
    out << "1,2,3\n4,5\n";
  }
  EXPECT_THROW(read_heatmap_csv(path), ParseError);
  std::filesystem::remove(path);
}
