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

// TrainConfig <-> TOML / JSON / dotted command-line overrides.
//
// Every setting has one dotted key, used verbatim as a TOML path, a JSON
// path in checkpoint metadata and a `--key value` flag:
//
//   seed  n
//   train.epochs  train.batches_per_epoch  train.batch_size
//   train.learning_rate  train.grad_clip_norm  train.baseline_val_size
//   train.baseline_threshold  train.precision (f32|f64)  train.debug_checks
//   encoder.d  encoder.layers  encoder.heads  encoder.tanh_scale
//   encoder.normalization (batch|none)  encoder.feed_forward
//   decoder.kind (softmax|sinkhorn)  decoder.lambda  decoder.iterations
//   decoder.epsilon  decoder.log_domain  decoder.mask_before_sinkhorn

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stsp/trainer.hpp"

namespace stsp {

using ConfigOverride = std::pair<std::string, std::string>;

/// All dotted keys, in file order.
std::vector<std::string> config_keys();
bool is_config_key(const std::string& key);

/// Defaults, then the TOML file (if given), then overrides in order. The
/// result is validated. Unknown keys, type mismatches and invariant
/// violations raise ConfigError; a missing file raises IoError.
TrainConfig load_config(const std::optional<std::filesystem::path>& file,
                        const std::vector<ConfigOverride>& overrides = {});

TrainConfig parse_config_toml(const std::string& text,
                              const std::string& source = "<string>");

/// Sets one key from its textual form.
void apply_override(TrainConfig& config, const std::string& key,
                    const std::string& value);

/// Complete TOML document; parse_config_toml reproduces the same config.
std::string config_to_toml(const TrainConfig& config);

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace stsp
