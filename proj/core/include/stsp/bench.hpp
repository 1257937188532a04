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

// Optimality gaps, benchmark reports and the Sinkhorn ablation grid.

#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stsp/checkpoint.hpp"
#include "stsp/trainer.hpp"

namespace stsp {

struct InstanceRecord {
  std::size_t index = 0;
  double model_length = 0.0;
  double oracle_length = 0.0;
  double decode_seconds = 0.0;
  std::vector<int> order;
};

struct GapReport {
  double model_mean_length = 0.0;
  double oracle_mean_length = 0.0;
  /// model_mean_length / oracle_mean_length.
  double ratio = 0.0;
  /// (ratio - 1) * 100.
  double gap_percent = 0.0;
  std::vector<InstanceRecord> records;
  std::string search = "none";
  std::size_t width = 0;
  std::string oracle = "none";
  /// Total over the timed pass; the warm-up decode is excluded.
  double wall_seconds = 0.0;
  double mean_decode_seconds = 0.0;
  std::string hardware;
};

/// Paired gap. Throws PairingError on a length mismatch or empty input.
GapReport optimality_gap(std::span<const double> model_lengths,
                         std::span<const double> oracle_lengths);

enum class SearchKind { greedy, beam, sample };

struct SearchSpec {
  SearchKind kind = SearchKind::greedy;
  std::size_t width = 1;    // beam width
  std::size_t samples = 1;  // sample(k)
  std::uint64_t seed = 0;   // sample streams

  std::string name() const;
  /// Width for beam, sample count for sample, 1 for greedy.
  std::size_t size() const;
};

/// Policy parameters restored from a checkpoint, in the checkpoint's dtype.
class LoadedPolicy {
 public:
  static LoadedPolicy from_checkpoint(const Checkpoint& ckpt);
  static LoadedPolicy load(const std::filesystem::path& path);

  const TrainConfig& config() const noexcept { return config_; }
  std::size_t city_count() const noexcept { return config_.n; }

  /// Evaluation-mode heatmaps.
  std::vector<HeatmapLogits> heatmaps(std::span<const TspInstance> instances);

 private:
  TrainConfig config_;
  std::variant<ParamStore<float>, ParamStore<double>> params_;
};

/// One tour per instance with the given search. Sampling instance i uses
/// stream (spec.seed, "bench-sample", i) and keeps the shortest of k draws.
Trajectory search_tour(const HeatmapLogits& heatmap, const TspInstance& instance,
                       const SearchSpec& spec, std::size_t index);

/// Decodes every instance (one forward per instance, timed individually
/// after one untimed warm-up) and pairs it with the oracle: `reference` when
/// given, otherwise solve_exact for n <= kMaxExactCities. Without either,
/// OracleUnavailableError.
GapReport run_benchmark(LoadedPolicy& model, std::span<const TspInstance> instances,
                        const SearchSpec& spec,
                        std::optional<std::span<const Tour>> reference = std::nullopt);

/// Oracle lengths via solve_exact, or OracleUnavailableError.
std::vector<double> exact_lengths(std::span<const TspInstance> instances);

nlohmann::json report_to_json(const GapReport& report);
/// Header plus one summary row.
std::string report_csv(const GapReport& report);

/// Host description recorded in reports.
std::string hardware_summary();

struct AblationRow {
  double lambda = 0.0;
  std::size_t iterations = 0;
  double greedy_score = 0.0;
  double greedy_gap = 0.0;
  double beam_score = 0.0;
  double beam_gap = 0.0;
};

/// Trains one Sinkhorn model per (lambda, iterations) cell from `base`
/// (same seed in every cell) and scores greedy and beam(beam_width) against
/// the exact oracle on `eval`. Cells are ordered lambda-major.
std::vector<AblationRow> ablate_sinkhorn(const TrainConfig& base,
                                         std::span<const double> lambdas,
                                         std::span<const std::size_t> iterations,
                                         std::span<const TspInstance> eval,
                                         std::size_t beam_width);

/// "lambda,iterations,greedy_score,greedy_gap,beam_score,beam_gap" + rows.
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace stsp
