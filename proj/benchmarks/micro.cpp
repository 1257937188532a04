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

#include <benchmark/benchmark.h>

#include <random>

#include "stsp/policy.hpp"
#include "stsp/trainer.hpp"

namespace {

using namespace stsp;

Tensor<double> random_scores(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  Tensor<double> t({n, n});
  for (double& v : t.data) v = unif(rng);
  return t;
}

void BM_Sinkhorn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SinkhornConfig cfg;
  cfg.iterations = static_cast<std::size_t>(state.range(1));
  const Tensor<double> scores = random_scores(n);
  for (auto _ : state) {
    ad::Graph<double> g(false);
    benchmark::DoNotOptimize(sinkhorn_decode(g.constant(scores), cfg).value().data.data());
  }
}
BENCHMARK(BM_Sinkhorn)->Args({10, 1})->Args({50, 1})->Args({50, 10})->Args({50, 100});

void BM_EncoderForward(benchmark::State& state) {
  PolicyConfig p;
  ParamStore<float> store;
  Rng rng(1);
  init_policy_params(store, p, rng);
  const auto batch = generate_instances(static_cast<std::size_t>(state.range(0)), 10, 2);
  for (auto _ : state) {
    ad::Graph<float> g(false);
    benchmark::DoNotOptimize(policy_forward(g, store, p, batch, Mode::eval).p_logits.id());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  PolicyConfig p;
  ParamStore<float> policy;
  Rng rng(1);
  init_policy_params(policy, p, rng);
  ParamStore<float> baseline = policy;
  const auto batch = generate_instances(static_cast<std::size_t>(state.range(0)), 10, 3);
  Rng sample(4);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto rb = reinforce_batch_loss(g, policy, baseline, p, batch, sample);
    g.backward(rb.loss);
    adam_step(policy, AdamConfig{});
  }
}
BENCHMARK(BM_TrainStep)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_HeldKarp(benchmark::State& state) {
  const auto inst = generate_instances(1, static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_exact(inst[0]).length);
}
BENCHMARK(BM_HeldKarp)->Arg(10)->Arg(13)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Beam(benchmark::State& state) {
  const auto inst = generate_instances(1, 10, 6);
  const Tensor<double> logits = random_scores(10);
  const auto width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(decode_beam(logits, width, inst[0]).length);
}
BENCHMARK(BM_Beam)->Arg(1)->Arg(16)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
