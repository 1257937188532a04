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

// REINFORCE with a greedy-rollout baseline.
//
// RNG streams (all derived from TrainConfig::seed):
//   "init"              parameter initialisation
//   "train-instances"   index = global batch number
//   "train-sample"      index = global batch number
//   "baseline-val"      index = epoch

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stsp/checkpoint.hpp"
#include "stsp/optimizer.hpp"
#include "stsp/policy.hpp"

namespace stsp {

enum class Precision { f32, f64 };

struct TrainConfig {
  std::size_t n = 10;
  std::size_t epochs = 20;
  std::size_t batches_per_epoch = 100;
  std::size_t batch_size = 256;
  double learning_rate = 1e-4;
  double grad_clip_norm = 1.0;
  PolicyConfig policy;
  std::size_t baseline_val_size = 1000;
  /// Required mean improvement before the baseline is replaced.
  double baseline_threshold = 0.0;
  std::uint64_t seed = 1;
  Precision precision = Precision::f32;
  /// Fingerprint the parameter stores around every step.
  bool debug_checks = false;

  void validate() const;
  AdamConfig adam() const;
};

template <typename S>
struct ReinforceBatch {
  ad::Var<S> loss;
  std::vector<Trajectory> sampled;
  std::vector<double> baseline_lengths;
};

/// Builds the surrogate (1/B) sum_b (L(pi_b) - b(x_b)) * log p(pi_b) in `g`.
/// Tours are sampled from the policy's `mode` forward; the baseline is a
/// greedy decode of an evaluation-mode, gradient-free forward of `baseline`.
/// Throws NumericalDomainError with the offending instance and heatmap if
/// the policy output or the loss is not finite.
template <typename S>
ReinforceBatch<S> reinforce_batch_loss(ad::Graph<S>& g, ParamStore<S>& policy,
                                       ParamStore<S>& baseline,
                                       const PolicyConfig& config,
                                       std::span<const TspInstance> instances,
                                       Rng& sample_rng, Mode mode = Mode::train);

struct BaselineUpdate {
  bool updated = false;
  double policy_mean = 0.0;
  double baseline_mean = 0.0;
};

/// Greedy mean lengths of both models on `val`. If the policy's is below
/// the baseline's minus `threshold`, the policy is copied into the baseline.
template <typename S>
BaselineUpdate maybe_update_baseline(ParamStore<S>& policy, ParamStore<S>& baseline,
                                     const PolicyConfig& config,
                                     std::span<const TspInstance> val,
                                     double threshold);

/// Mean greedy tour length of a model over a set of instances.
template <typename S>
double mean_greedy_length(ParamStore<S>& params, const PolicyConfig& config,
                          std::span<const TspInstance> instances);

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_sampled_length = 0.0;
  /// Policy greedy mean on this epoch's validation set.
  double mean_greedy_val_length = 0.0;
  double baseline_val_length = 0.0;
  bool baseline_updated = false;
  double loss = 0.0;
  double wall_seconds = 0.0;
};

/// Deterministic fields only; wall time goes to the timing log.
nlohmann::json metrics_to_json(const EpochMetrics& m);

struct TrainOptions {
  /// Receives config.toml, metrics.jsonl, timing.jsonl and
  /// checkpoints/epoch_NNNN.stsp. Nothing is written when unset.
  std::optional<std::filesystem::path> run_dir;
  std::function<void(const EpochMetrics&)> on_epoch;
  /// Polled after every batch; when set the epoch is cut short, a checkpoint
  /// is written and train returns with `interrupted`.
  const std::atomic<bool>* stop = nullptr;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  /// Policy parameters after the last completed batch.
  Checkpoint checkpoint;
  bool interrupted = false;
};

TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

/// Metadata attached to every checkpoint written by train.
nlohmann::json checkpoint_metadata(const TrainConfig& config, std::size_t epoch,
                                   std::size_t global_batch);

}  // namespace stsp
