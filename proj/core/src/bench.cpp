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

#include "stsp/bench.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include "stsp/config.hpp"
#include "stsp/error.hpp"
#include "stsp/tsp_io.hpp"

namespace stsp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

GapReport optimality_gap(std::span<const double> model_lengths,
                         std::span<const double> oracle_lengths) {
  if (model_lengths.size() != oracle_lengths.size()) {
    throw PairingError("optimality_gap: " + std::to_string(model_lengths.size()) +
                       " model lengths vs " + std::to_string(oracle_lengths.size()) +
                       " oracle lengths");
  }
  if (model_lengths.empty()) throw PairingError("optimality_gap: no instances");
  GapReport r;
  double model_sum = 0.0;
  double oracle_sum = 0.0;
  r.records.resize(model_lengths.size());
  for (std::size_t i = 0; i < model_lengths.size(); ++i) {
    model_sum += model_lengths[i];
    oracle_sum += oracle_lengths[i];
    r.records[i].index = i;
    r.records[i].model_length = model_lengths[i];
    r.records[i].oracle_length = oracle_lengths[i];
  }
  const auto count = static_cast<double>(model_lengths.size());
  r.model_mean_length = model_sum / count;
  r.oracle_mean_length = oracle_sum / count;
  if (!(r.oracle_mean_length > 0.0)) {
    throw PairingError("optimality_gap: oracle mean length must be positive");
  }
  r.ratio = r.model_mean_length / r.oracle_mean_length;
  r.gap_percent = (r.ratio - 1.0) * 100.0;
  return r;
}

std::string SearchSpec::name() const {
  switch (kind) {
    case SearchKind::greedy: return "greedy";
    case SearchKind::beam: return "beam";
    case SearchKind::sample: return "sample";
  }
  return "?";
}

std::size_t SearchSpec::size() const {
  switch (kind) {
    case SearchKind::beam: return width;
    case SearchKind::sample: return samples;
    default: return 1;
  }
}

LoadedPolicy LoadedPolicy::from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("config")) {
    throw CheckpointError("checkpoint metadata has no config");
  }
  LoadedPolicy p;
  p.config_ = config_from_json(ckpt.metadata.at("config"));
  p.config_.policy.validate();
  Rng unused(0);
  if (ckpt.dtype() == "f32") {
    ParamStore<float> store;
    init_policy_params(store, p.config_.policy, unused);
    apply_checkpoint(ckpt, store);
    p.params_ = std::move(store);
  } else {
    ParamStore<double> store;
    init_policy_params(store, p.config_.policy, unused);
    apply_checkpoint(ckpt, store);
    p.params_ = std::move(store);
  }
  return p;
}

LoadedPolicy LoadedPolicy::load(const std::filesystem::path& path) {
  return from_checkpoint(load_checkpoint(path));
}

std::vector<HeatmapLogits> LoadedPolicy::heatmaps(std::span<const TspInstance> instances) {
  return std::visit(
      [&](auto& store) { return policy_heatmaps(store, config_.policy, instances); },
      params_);
}

Trajectory search_tour(const HeatmapLogits& heatmap, const TspInstance& instance,
                       const SearchSpec& spec, std::size_t index) {
  switch (spec.kind) {
    case SearchKind::greedy:
      return decode_greedy(heatmap.logits, instance);
    case SearchKind::beam:
      return decode_beam(heatmap.logits, spec.width, instance);
    case SearchKind::sample: {
      if (spec.samples == 0) throw ConfigError("sample search needs k >= 1");
      Rng rng = Rng::stream(spec.seed, "bench-sample", index);
      Trajectory best = decode_sample(heatmap.logits, instance, rng);
      for (std::size_t k = 1; k < spec.samples; ++k) {
        Trajectory t = decode_sample(heatmap.logits, instance, rng);
        if (t.length < best.length) best = std::move(t);
      }
      return best;
    }
  }
  throw ConfigError("unknown search kind");
}

std::vector<double> exact_lengths(std::span<const TspInstance> instances) {
  std::vector<double> out;
  out.reserve(instances.size());
  for (const TspInstance& inst : instances) {
    if (inst.size() > kMaxExactCities) {
      throw OracleUnavailableError("no exact oracle for n = " + std::to_string(inst.size()) +
                                   " (limit " + std::to_string(kMaxExactCities) +
                                   "); supply reference tours");
    }
    out.push_back(solve_exact(inst).length);
  }
  return out;
}

GapReport run_benchmark(LoadedPolicy& model, std::span<const TspInstance> instances,
                        const SearchSpec& spec,
                        std::optional<std::span<const Tour>> reference) {
  if (instances.empty()) throw InvalidInputError("run_benchmark: no instances");
  if (spec.kind == SearchKind::beam && spec.width == 0) {
    throw ConfigError("beam search needs width >= 1");
  }

  std::vector<double> oracle;
  std::string oracle_name;
  if (reference) {
    if (reference->size() != instances.size()) {
      throw PairingError("reference file has " + std::to_string(reference->size()) +
                         " tours for " + std::to_string(instances.size()) + " instances");
    }
    for (std::size_t i = 0; i < instances.size(); ++i) {
      validate_permutation((*reference)[i].order, instances[i].size());
      oracle.push_back(tour_length(instances[i], (*reference)[i].order));
    }
    oracle_name = "reference";
  } else {
    oracle = exact_lengths(instances);
    oracle_name = "exact";
  }

  // Warm-up pass, not timed.
  search_tour(model.heatmaps(instances.first(1)).front(), instances.front(), spec, 0);

  std::vector<double> lengths(instances.size());
  std::vector<InstanceRecord> records(instances.size());
  const auto start = Clock::now();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto t0 = Clock::now();
    HeatmapLogits h = std::move(model.heatmaps(instances.subspan(i, 1)).front());
    Trajectory t = search_tour(h, instances[i], spec, i);
    records[i].decode_seconds = seconds_since(t0);
    lengths[i] = t.length;
    records[i].order = std::move(t.order);
  }
  const double wall = seconds_since(start);

  GapReport r = optimality_gap(lengths, oracle);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    r.records[i].decode_seconds = records[i].decode_seconds;
    r.records[i].order = std::move(records[i].order);
    if (oracle_name == "exact" && lengths[i] < oracle[i] - 1e-9) {
      throw Error("tour validity bug: instance " + std::to_string(i) + " decoded length " +
                  format_real(lengths[i]) + " is below the exact optimum " +
                  format_real(oracle[i]));
    }
  }
  r.search = spec.name();
  r.width = spec.size();
  r.oracle = oracle_name;
  r.wall_seconds = wall;
  r.mean_decode_seconds = wall / static_cast<double>(instances.size());
  r.hardware = hardware_summary();
  return r;
}

nlohmann::json report_to_json(const GapReport& r) {
  nlohmann::json records = nlohmann::json::array();
  for (const InstanceRecord& rec : r.records) {
    records.push_back({{"index", rec.index},
                       {"model_length", rec.model_length},
                       {"oracle_length", rec.oracle_length},
                       {"decode_seconds", rec.decode_seconds},
                       {"order", rec.order}});
  }
  return {{"model_mean_length", r.model_mean_length},
          {"oracle_mean_length", r.oracle_mean_length},
          {"ratio", r.ratio},
          {"gap_percent", r.gap_percent},
          {"search", r.search},
          {"width", r.width},
          {"oracle", r.oracle},
          {"instances", r.records.size()},
          {"wall_seconds", r.wall_seconds},
          {"mean_decode_seconds", r.mean_decode_seconds},
          {"hardware", r.hardware},
          {"records", std::move(records)}};
}

std::string report_csv(const GapReport& r) {
  std::string out =
      "search,width,instances,model_mean_length,oracle_mean_length,ratio,gap_percent,"
      "wall_seconds,mean_decode_seconds\n";
  out += r.search + "," + std::to_string(r.width) + "," + std::to_string(r.records.size()) +
         "," + format_real(r.model_mean_length) + "," + format_real(r.oracle_mean_length) +
         "," + format_real(r.ratio) + "," + format_real(r.gap_percent) + "," +
         format_real(r.wall_seconds) + "," + format_real(r.mean_decode_seconds) + "\n";
  return out;
}

std::string hardware_summary() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + "; " + std::to_string(std::thread::hardware_concurrency()) +
         " hardware threads; single-context decode";
}

std::vector<AblationRow> ablate_sinkhorn(const TrainConfig& base,
                                         std::span<const double> lambdas,
                                         std::span<const std::size_t> iterations,
                                         std::span<const TspInstance> eval,
                                         std::size_t beam_width) {
  const std::vector<double> oracle = exact_lengths(eval);
  std::vector<AblationRow> rows;
  for (double lambda : lambdas) {
    for (std::size_t iters : iterations) {
      TrainConfig cfg = base;
      cfg.policy.decoder = DecoderKind::sinkhorn;
      cfg.policy.sinkhorn.lambda = lambda;
      cfg.policy.sinkhorn.iterations = iters;
      TrainResult trained = train(cfg);
      LoadedPolicy model = LoadedPolicy::from_checkpoint(trained.checkpoint);
      std::vector<HeatmapLogits> maps = model.heatmaps(eval);
      std::vector<double> greedy(eval.size());
      std::vector<double> beam(eval.size());
      for (std::size_t i = 0; i < eval.size(); ++i) {
        greedy[i] = decode_greedy(maps[i].logits, eval[i]).length;
        beam[i] = decode_beam(maps[i].logits, beam_width, eval[i]).length;
      }
      const GapReport g = optimality_gap(greedy, oracle);
      const GapReport b = optimality_gap(beam, oracle);
      rows.push_back({lambda, iters, g.model_mean_length, g.gap_percent, b.model_mean_length,
                      b.gap_percent});
    }
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "lambda,iterations,greedy_score,greedy_gap,beam_score,beam_gap\n";
  for (const AblationRow& r : rows) {
    out += format_real(r.lambda) + "," + std::to_string(r.iterations) + "," +
           format_real(r.greedy_score) + "," + format_real(r.greedy_gap) + "," +
           format_real(r.beam_score) + "," + format_real(r.beam_gap) + "\n";
  }
  return out;
}

}  // namespace stsp
