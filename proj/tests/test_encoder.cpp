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
#include <numeric>
#include <random>

#include "stsp/encoder.hpp"
#include "stsp/error.hpp"

using namespace stsp;
using G = ad::Graph<double>;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.d = 16;
  c.layers = 2;
  c.heads = 4;
  return c;
}

ParamStore<double> init(const EncoderConfig& c, std::uint64_t seed = 3) {
  ParamStore<double> store;
  Rng rng(seed);
  init_encoder_params(store, c, rng);
  return store;
}

Tensor<double> heatmap(ParamStore<double>& store, const EncoderConfig& c,
                       std::span<const TspInstance> batch, Mode mode) {
  G g(false);
  ad::Var<double> h = encode(g, batch, store, c, mode);
  return heatmap_head(g, h, batch.size(), store, c).value();
}

}  // namespace

TEST(Encoder, OutputShapes) {
  const EncoderConfig c = small_config();
  auto store = init(c);
  const auto batch = generate_instances(3, 7, 1);
  G g;
  ad::Var<double> h = encode(g, std::span(batch), store, c, Mode::train);
  EXPECT_EQ(h.shape(), (Shape{21, 16}));
  EXPECT_EQ(heatmap_head(g, h, 3, store, c).shape(), (Shape{3, 7, 7}));
}

TEST(Encoder, ParameterCountMatchesStore) {
  for (bool ff : {true, false}) {
    for (auto norm : {Normalization::batch, Normalization::none}) {
      EncoderConfig c = small_config();
      c.feed_forward = ff;
      c.normalization = norm;
      EXPECT_EQ(init(c).trainable_count(), count_params(c));
    }
  }
  // d=64, two layers, batch norm, feed-forward: embed 192, per layer
  // 16384 + 128 + 33088 + 128, head 8192.
  EXPECT_EQ(count_params(EncoderConfig{}), 107840u);
}

TEST(Encoder, InitialisationBounds) {
  const EncoderConfig c = small_config();
  const auto store = init(c);
  for (double v : store.at("embed.weight").value.data) EXPECT_LT(std::abs(v), 1.0 / std::sqrt(2.0));
  for (double v : store.at("layer0.ff.w2").value.data) EXPECT_LT(std::abs(v), 1.0 / std::sqrt(64.0));
  for (double v : store.at("embed.bias").value.data) EXPECT_EQ(v, 0.0);
  for (double v : store.at("layer1.norm1.gamma").value.data) EXPECT_EQ(v, 1.0);
  EXPECT_FALSE(store.at("layer1.norm1.running_mean").trainable);
}

TEST(Encoder, InvalidConfigsAreRejected) {
  EncoderConfig c = small_config();
  c.layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.tanh_scale = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Encoder, HeatmapIsBoundedByScale) {
  EncoderConfig c = small_config();
  c.tanh_scale = 10.0;
  auto store = init(c);
  const auto batch = generate_instances(8, 10, 2);
  for (Mode mode : {Mode::train, Mode::eval}) {
    for (double v : heatmap(store, c, batch, mode).data) EXPECT_LE(std::abs(v), 10.0);
  }
}

TEST(Encoder, ZeroWeightsGiveZeroHeatmap) {
  const EncoderConfig c = small_config();
  auto store = init(c);
  for (auto& [name, e] : store.entries()) {
    if (name.find("gamma") == std::string::npos && e.trainable) {
      std::fill(e.value.data.begin(), e.value.data.end(), 0.0);
    }
  }
  const auto batch = generate_instances(2, 6, 4);
  for (double v : heatmap(store, c, batch, Mode::eval).data) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, IdenticalCitiesGiveConstantHeatmap) {
  EncoderConfig c = small_config();
  c.normalization = Normalization::none;
  auto store = init(c);
  std::vector<TspInstance> batch{
      TspInstance::from_coords(std::vector<City>(5, City{0.3, 0.6}))};
  const Tensor<double> p = heatmap(store, c, batch, Mode::eval);
  for (double v : p.data) EXPECT_NEAR(v, p[0], 1e-12);
}

// Permuting cities permutes rows and columns of the heatmap. The instance
// type reorders cities canonically, so the permutation is applied to the
// embedded rows.
TEST(Encoder, PermutationEquivariantInEvaluation) {
  const EncoderConfig c = small_config();
  auto store = init(c);
  // Non-trivial running statistics.
  for (int k = 0; k < 3; ++k) heatmap(store, c, generate_instances(4, 9, 10 + k), Mode::train);

  const auto batch = generate_instances(1, 9, 5);
  std::vector<std::uint32_t> perm(9);
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);

  G g(false);
  ad::Var<double> h0 = embed_input(g, std::span(batch), store);
  ad::Var<double> hp = ad::gather_rows(h0, std::span<const std::uint32_t>(perm));
  for (std::size_t l = 0; l < c.layers; ++l) {
    h0 = attention_layer(g, h0, l, 1, store, c, Mode::eval);
    hp = attention_layer(g, hp, l, 1, store, c, Mode::eval);
  }
  const Tensor<double> p = heatmap_head(g, h0, 1, store, c).value();
  const Tensor<double> q = heatmap_head(g, hp, 1, store, c).value();
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      EXPECT_NEAR(q[i * 9 + j], p[perm[i] * 9 + perm[j]], 1e-12);
    }
  }
}

TEST(Encoder, SingleTokenAttentionPassesValuesThrough) {
  EncoderConfig c = small_config();
  c.normalization = Normalization::none;
  c.feed_forward = false;
  auto store = init(c);
  store.at("layer0.wo").value = Tensor<double>({16, 16}, 0.0);
  for (std::size_t i = 0; i < 16; ++i) store.at("layer0.wo").value.at(i, i) = 1.0;
  G g(false);
  Tensor<double> x({1, 16});
  for (std::size_t i = 0; i < 16; ++i) x[i] = 0.1 * static_cast<double>(i);
  ad::Var<double> h = g.constant(x);
  // One token attends only to itself with weight 1: out = h + h Wv.
  const Tensor<double> out = attention_layer(g, h, 0, 1, store, c, Mode::eval).value();
  const Tensor<double>& wv = store.at("layer0.wv").value;
  for (std::size_t j = 0; j < 16; ++j) {
    double expect = x[j];
    for (std::size_t k = 0; k < 16; ++k) expect += x[k] * wv.at(k, j);
    EXPECT_NEAR(out[j], expect, 1e-12);
  }
}

TEST(Encoder, MixedBatchSizesRejected) {
  const EncoderConfig c = small_config();
  auto store = init(c);
  std::vector<TspInstance> batch{generate_instances(1, 5, 1)[0], generate_instances(1, 6, 1)[0]};
  G g;
  EXPECT_THROW(encode(g, std::span(batch), store, c, Mode::eval), ConfigError);
}

TEST(Encoder, FloatAndDoubleAgree) {
  const EncoderConfig c = small_config();
  ParamStore<double> sd;
  ParamStore<float> sf;
  Rng r1(9);
  Rng r2(9);
  init_encoder_params(sd, c, r1);
  init_encoder_params(sf, c, r2);
  const auto batch = generate_instances(2, 8, 3);
  ad::Graph<float> gf(false);
  const Tensor<float> pf =
      heatmap_head(gf, encode(gf, std::span(batch), sf, c, Mode::eval), 2, sf, c).value();
  const Tensor<double> pd = heatmap(sd, c, batch, Mode::eval);
  for (std::size_t i = 0; i < pd.size(); ++i) EXPECT_NEAR(pf[i], pd[i], 1e-4);
}
