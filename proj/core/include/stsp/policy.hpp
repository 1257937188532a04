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

#pragma once

#include <span>
#include <vector>

#include "stsp/decoder.hpp"
#include "stsp/encoder.hpp"
#include "stsp/search.hpp"

namespace stsp {

/// Encoder, heatmap head and decoder head as one parameterised policy.
struct PolicyConfig {
  EncoderConfig encoder;
  DecoderKind decoder = DecoderKind::sinkhorn;
  SinkhornConfig sinkhorn;
  /// Give self-loops a prohibitive cost before the Sinkhorn kernel.
  bool mask_before_sinkhorn = false;

  void validate() const;
};

template <typename S>
struct PolicyOutput {
  ad::Var<S> p_tanh;    // (B, n, n)
  ad::Var<S> p_logits;  // (B, n, n)
};

template <typename S>
void init_policy_params(ParamStore<S>& store, const PolicyConfig& config, Rng& rng);

template <typename S>
PolicyOutput<S> policy_forward(ad::Graph<S>& g, ParamStore<S>& params,
                               const PolicyConfig& config,
                               std::span<const TspInstance> batch, Mode mode,
                               ad::FloorCounter* warnings = nullptr);

/// Evaluation-mode heatmaps without gradient tracking, processed in chunks
/// of at most `chunk` instances.
template <typename S>
std::vector<HeatmapLogits> policy_heatmaps(ParamStore<S>& params,
                                           const PolicyConfig& config,
                                           std::span<const TspInstance> batch,
                                           std::size_t chunk = 256);

/// Sum over the batch of weight[b] * log p(order_b) computed in the graph
/// with the same masking and renormalisation the decoders use. `logits` is
/// (B, n, n); each order starts at city 0.
template <typename S>
ad::Var<S> weighted_trajectory_logprob(ad::Var<S> logits,
                                       std::span<const std::vector<int>> orders,
                                       std::span<const double> weights);

}  // namespace stsp
