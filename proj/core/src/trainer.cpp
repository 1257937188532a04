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

#include "stsp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stsp/config.hpp"
#include "stsp/error.hpp"
#include "stsp/run_dir.hpp"
#include "stsp/tsp_io.hpp"

namespace stsp {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

template <typename S>
bool all_finite(const Tensor<S>& t, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    if (!std::isfinite(static_cast<double>(t[i]))) return false;
  }
  return true;
}

template <typename S>
std::string matrix_text(const Tensor<S>& t, std::size_t b, std::size_t n) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof(buf), j == 0 ? "%.6g" : ",%.6g",
                    static_cast<double>(t[(b * n + i) * n + j]));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

template <typename S>
[[noreturn]] void numerical_abort(const std::string& what, std::size_t b,
                                  std::span<const TspInstance> instances,
                                  const PolicyOutput<S>& out) {
  const std::size_t n = instances[b].size();
  throw NumericalDomainError(what + " on batch instance " + std::to_string(b) +
                             "\ninstance: " + instance_to_json_line(instances[b]) +
                             "\nP_tanh:\n" + matrix_text(out.p_tanh.value(), b, n) +
                             "P_logits:\n" + matrix_text(out.p_logits.value(), b, n));
}

/// The decoders and attention only report that a NaN appeared somewhere in
/// the batch. Replays instances one at a time to find one that fails on its
/// own, so the diagnostic can name it and show its P_tanh.
template <typename S>
[[noreturn]] void locate_and_abort(const std::string& what, ParamStore<S>& params,
                                   const PolicyConfig& config,
                                   std::span<const TspInstance> instances, Mode mode) {
  for (std::size_t b = 0; b < instances.size(); ++b) {
    const auto one = instances.subspan(b, 1);
    ad::Graph<S> g(false);
    PolicyOutput<S> out;
    try {
      out.p_tanh = heatmap_head(g, encode(g, one, params, config.encoder, mode), 1, params,
                                config.encoder);
    } catch (const NumericalDomainError&) {
      throw NumericalDomainError(what + " on batch instance " + std::to_string(b) +
                                 "\ninstance: " + instance_to_json_line(instances[b]));
    }
    const std::size_t n = instances[b].size();
    if (!all_finite(out.p_tanh.value(), 0, n * n)) {
      throw NumericalDomainError(what + " on batch instance " + std::to_string(b) +
                                 "\ninstance: " + instance_to_json_line(instances[b]) +
                                 "\nP_tanh:\n" + matrix_text(out.p_tanh.value(), 0, n));
    }
  }
  throw NumericalDomainError(what + " (no single instance reproduces it)\ninstance 0: " +
                             instance_to_json_line(instances.front()));
}

template <typename S>
TrainResult train_impl(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  const AdamConfig adam = config.adam();

  ParamStore<S> policy;
  Rng init = Rng::stream(config.seed, "init");
  init_policy_params(policy, config.policy, init);
  ParamStore<S> baseline = policy;

  std::optional<RunDir> run;
  std::ofstream metrics_out;
  std::ofstream timing_out;
  if (options.run_dir) {
    run = RunDir::create(*options.run_dir);
    write_new_file(run->config_path(), config_to_toml(config));
    write_new_file(run->metrics_path(), "");
    write_new_file(run->timing_path(), "");
    metrics_out.open(run->metrics_path(), std::ios::binary | std::ios::app);
    timing_out.open(run->timing_path(), std::ios::binary | std::ios::app);
    if (!metrics_out || !timing_out) throw IoError("cannot open logs in " + run->path().string());
  }

  TrainResult result;
  std::size_t global_batch = 0;
  auto checkpoint_now = [&](std::size_t epoch, bool complete) {
    nlohmann::json meta = checkpoint_metadata(config, epoch, global_batch);
    meta["complete"] = complete;
    result.checkpoint = make_checkpoint(policy, std::move(meta));
    if (run) save_checkpoint(run->checkpoint_path(epoch), result.checkpoint);
  };

  try {
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      double length_sum = 0.0;
      double loss_sum = 0.0;
      std::size_t tours = 0;
      std::size_t batches = 0;
      std::uint64_t baseline_fp = config.debug_checks ? baseline.fingerprint() : 0;

      for (std::size_t k = 0; k < config.batches_per_epoch; ++k) {
        Rng instance_rng = Rng::stream(config.seed, "train-instances", global_batch);
        Rng sample_rng = Rng::stream(config.seed, "train-sample", global_batch);
        const std::vector<TspInstance> instances =
            generate_instances(config.batch_size, config.n, instance_rng);
        const std::uint64_t before = config.debug_checks ? policy.fingerprint(true) : 0;
        {
          ad::Graph<S> g(true);
          ReinforceBatch<S> rb = reinforce_batch_loss(g, policy, baseline, config.policy,
                                                      instances, sample_rng, Mode::train);
          g.backward(rb.loss);
          loss_sum += static_cast<double>(rb.loss.value().item());
          for (const Trajectory& t : rb.sampled) length_sum += t.length;
          tours += rb.sampled.size();
        }
        if (config.debug_checks) {
          if (policy.fingerprint(true) != before) {
            throw Error("policy parameters changed outside adam_step");
          }
          if (baseline.fingerprint() != baseline_fp) {
            throw Error("baseline parameters changed between updates");
          }
        }
        adam_step(policy, adam);
        ++global_batch;
        ++batches;
        if (options.stop != nullptr && options.stop->load()) {
          result.interrupted = true;
          break;
        }
      }

      if (result.interrupted) {
        checkpoint_now(epoch, false);
        break;
      }

      Rng val_rng = Rng::stream(config.seed, "baseline-val", epoch);
      const std::vector<TspInstance> val =
          generate_instances(config.baseline_val_size, config.n, val_rng);
      const BaselineUpdate upd = maybe_update_baseline(policy, baseline, config.policy, val,
                                                       config.baseline_threshold);

      EpochMetrics m;
      m.epoch = epoch;
      m.mean_sampled_length = length_sum / static_cast<double>(tours);
      m.mean_greedy_val_length = upd.policy_mean;
      m.baseline_val_length = upd.baseline_mean;
      m.baseline_updated = upd.updated;
      m.loss = loss_sum / static_cast<double>(batches);
      m.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.metrics.push_back(m);

      if (run) {
        metrics_out << metrics_to_json(m).dump() << '\n';
        metrics_out.flush();
        nlohmann::json timing = {{"epoch", epoch}, {"wall_seconds", m.wall_seconds}};
        timing_out << timing.dump() << '\n';
        timing_out.flush();
        if (!metrics_out || !timing_out) throw IoError("failed writing run logs");
      }
      checkpoint_now(epoch, true);
      if (options.on_epoch) options.on_epoch(m);
    }
  } catch (const NumericalDomainError& e) {
    if (run) {
      std::ofstream diag(unused_path(run->path() / "diagnostic.txt"));
      diag << e.what() << '\n';
    }
    throw;
  }
  if (result.checkpoint.tensors.empty()) checkpoint_now(0, true);
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  require(n >= 3, "n >= 3");
  require(n <= 100000, "n <= 100000");
  require(epochs > 0, "train.epochs > 0");
  require(batches_per_epoch > 0, "train.batches_per_epoch > 0");
  require(batch_size > 0, "train.batch_size > 0");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "train.learning_rate > 0");
  require(std::isfinite(grad_clip_norm) && grad_clip_norm > 0.0, "train.grad_clip_norm > 0");
  require(baseline_val_size > 0, "train.baseline_val_size > 0");
  require(std::isfinite(baseline_threshold) && baseline_threshold >= 0.0,
          "train.baseline_threshold >= 0");
  try {
    policy.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.learning_rate = learning_rate;
  a.clip_norm = grad_clip_norm;
  return a;
}

template <typename S>
ReinforceBatch<S> reinforce_batch_loss(ad::Graph<S>& g, ParamStore<S>& policy,
                                       ParamStore<S>& baseline, const PolicyConfig& config,
                                       std::span<const TspInstance> instances,
                                       Rng& sample_rng, Mode mode) {
  if (instances.empty()) throw ConfigError("reinforce_batch_loss: empty batch");
  PolicyOutput<S> out;
  try {
    out = policy_forward(g, policy, config, instances, mode);
  } catch (const NumericalDomainError& e) {
    locate_and_abort(e.what(), policy, config, instances, mode);
  }
  const std::size_t n = instances.front().size();
  const Tensor<S>& logits = out.p_logits.value();
  for (std::size_t b = 0; b < instances.size(); ++b) {
    if (!all_finite(logits, b * n * n, (b + 1) * n * n)) {
      numerical_abort("non-finite policy heatmap", b, instances, out);
    }
  }

  ReinforceBatch<S> rb;
  std::vector<HeatmapLogits> maps = split_heatmaps(logits);
  rb.sampled.reserve(instances.size());
  for (std::size_t b = 0; b < instances.size(); ++b) {
    rb.sampled.push_back(decode_sample(maps[b].logits, instances[b], sample_rng));
  }
  std::vector<HeatmapLogits> base_maps = policy_heatmaps(baseline, config, instances);
  rb.baseline_lengths.reserve(instances.size());
  for (std::size_t b = 0; b < instances.size(); ++b) {
    rb.baseline_lengths.push_back(decode_greedy(base_maps[b].logits, instances[b]).length);
  }

  const double inv_batch = 1.0 / static_cast<double>(instances.size());
  std::vector<std::vector<int>> orders;
  std::vector<double> weights;
  orders.reserve(instances.size());
  weights.reserve(instances.size());
  for (std::size_t b = 0; b < instances.size(); ++b) {
    orders.push_back(rb.sampled[b].order);
    weights.push_back((rb.sampled[b].length - rb.baseline_lengths[b]) * inv_batch);
  }
  rb.loss = weighted_trajectory_logprob(out.p_logits, orders, weights);
  if (!std::isfinite(static_cast<double>(rb.loss.value().item()))) {
    std::size_t worst = 0;
    for (std::size_t b = 0; b < instances.size(); ++b) {
      if (!std::isfinite(rb.sampled[b].logprob)) worst = b;
    }
    numerical_abort("non-finite loss", worst, instances, out);
  }
  return rb;
}

template <typename S>
double mean_greedy_length(ParamStore<S>& params, const PolicyConfig& config,
                          std::span<const TspInstance> instances) {
  if (instances.empty()) return 0.0;
  std::vector<HeatmapLogits> maps = policy_heatmaps(params, config, instances);
  double sum = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    sum += decode_greedy(maps[i].logits, instances[i]).length;
  }
  return sum / static_cast<double>(instances.size());
}

template <typename S>
BaselineUpdate maybe_update_baseline(ParamStore<S>& policy, ParamStore<S>& baseline,
                                     const PolicyConfig& config,
                                     std::span<const TspInstance> val, double threshold) {
  BaselineUpdate r;
  r.policy_mean = mean_greedy_length(policy, config, val);
  r.baseline_mean = mean_greedy_length(baseline, config, val);
  if (r.policy_mean < r.baseline_mean - threshold) {
    baseline.copy_values_from(policy);
    r.updated = true;
  }
  return r;
}

nlohmann::json metrics_to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"mean_sampled_length", m.mean_sampled_length},
          {"mean_greedy_val_length", m.mean_greedy_val_length},
          {"baseline_val_length", m.baseline_val_length},
          {"baseline_updated", m.baseline_updated},
          {"loss", m.loss}};
}

nlohmann::json checkpoint_metadata(const TrainConfig& config, std::size_t epoch,
                                   std::size_t global_batch) {
  return {{"config", config_to_json(config)},
          {"epoch", epoch},
          {"rng",
           {{"algorithm", "mt19937_64 named streams seeded by splitmix64"},
            {"seed", config.seed},
            {"next_batch", global_batch}}}};
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  return config.precision == Precision::f64 ? train_impl<double>(config, options)
                                            : train_impl<float>(config, options);
}

#define STSP_INSTANTIATE_TRAINER(S)                                                   \
  template ReinforceBatch<S> reinforce_batch_loss(                                    \
      ad::Graph<S>&, ParamStore<S>&, ParamStore<S>&, const PolicyConfig&,             \
      std::span<const TspInstance>, Rng&, Mode);                                      \
  template double mean_greedy_length(ParamStore<S>&, const PolicyConfig&,             \
                                     std::span<const TspInstance>);                   \
  template BaselineUpdate maybe_update_baseline(ParamStore<S>&, ParamStore<S>&,       \
                                                const PolicyConfig&,                  \
                                                std::span<const TspInstance>, double);

STSP_INSTANTIATE_TRAINER(float)
STSP_INSTANTIATE_TRAINER(double)

#undef STSP_INSTANTIATE_TRAINER

}  // namespace stsp
