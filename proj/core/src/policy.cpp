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

#include "stsp/policy.hpp"

#include <algorithm>

namespace stsp {

void PolicyConfig::validate() const {
  encoder.validate();
  if (decoder == DecoderKind::sinkhorn) sinkhorn.validate();
}

template <typename S>
void init_policy_params(ParamStore<S>& store, const PolicyConfig& config,
                        Rng& rng) {
  config.validate();
  init_encoder_params(store, config.encoder, rng);
}

template <typename S>
PolicyOutput<S> policy_forward(ad::Graph<S>& g, ParamStore<S>& params,
                               const PolicyConfig& config,
                               std::span<const TspInstance> batch, Mode mode,
                               ad::FloorCounter* warnings) {
  ad::Var<S> h = encode(g, batch, params, config.encoder, mode);
  PolicyOutput<S> out;
  out.p_tanh = heatmap_head(g, h, batch.size(), params, config.encoder);
  out.p_logits = config.decoder == DecoderKind::softmax
                     ? softmax_decode(out.p_tanh)
                     : sinkhorn_decode(out.p_tanh, config.sinkhorn, warnings,
                                       config.mask_before_sinkhorn);
  return out;
}

template <typename S>
std::vector<HeatmapLogits> policy_heatmaps(ParamStore<S>& params,
                                           const PolicyConfig& config,
                                           std::span<const TspInstance> batch,
                                           std::size_t chunk) {
  std::vector<HeatmapLogits> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    const std::size_t count = std::min(chunk, batch.size() - start);
    ad::Graph<S> g(false);
    PolicyOutput<S> fwd =
        policy_forward(g, params, config, batch.subspan(start, count), Mode::eval);
    for (HeatmapLogits& h : split_heatmaps(fwd.p_logits.value())) {
      out.push_back(std::move(h));
    }
  }
  return out;
}

template <typename S>
ad::Var<S> weighted_trajectory_logprob(ad::Var<S> logits,
                                       std::span<const std::vector<int>> orders,
                                       std::span<const double> weights) {
  const Shape& s = logits.shape();
  if (s.size() != 3 || s[1] != s[2] || s[0] != orders.size() ||
      weights.size() != orders.size()) {
    throw ConfigError("weighted_trajectory_logprob: logits " + shape_string(s) +
                      " do not match " + std::to_string(orders.size()) +
                      " trajectories");
  }
  const std::size_t batch = s[0];
  const std::size_t n = s[1];
  const std::size_t steps = n - 1;

  std::vector<std::uint32_t> rows;
  std::vector<std::uint8_t> mask(batch * steps * n, 0);
  std::vector<std::uint32_t> picks;
  Tensor<S> w({batch * steps, 1});
  rows.reserve(batch * steps);
  picks.reserve(batch * steps);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::vector<int>& order = orders[b];
    validate_permutation(order, n);
    if (order.front() != 0) throw InvalidTourError("trajectory must start at city 0");
    std::vector<std::uint8_t> visited(n, 0);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto from = static_cast<std::size_t>(order[t]);
      const auto to = static_cast<std::size_t>(order[t + 1]);
      visited[from] = 1;
      const std::size_t r = b * steps + t;
      rows.push_back(static_cast<std::uint32_t>(b * n + from));
      std::copy(visited.begin(), visited.end(), mask.begin() + r * n);
      picks.push_back(static_cast<std::uint32_t>(r * n + to));
      w[r] = static_cast<S>(weights[b]);
    }
  }
  ad::Graph<S>& g = logits.graph();
  ad::Var<S> chosen_rows = ad::gather_rows(ad::reshape(logits, {batch * n, n}), rows);
  ad::Var<S> step_logp = ad::log_softmax_rows(ad::masked_fill(chosen_rows, mask));
  ad::Var<S> picked =
      ad::gather_rows(ad::reshape(step_logp, {batch * steps * n, 1}), picks);
  return ad::reduce_sum(ad::mul(picked, g.constant(std::move(w))));
}

#define STSP_INSTANTIATE_POLICY(S)                                             \
  template void init_policy_params(ParamStore<S>&, const PolicyConfig&, Rng&); \
  template PolicyOutput<S> policy_forward(ad::Graph<S>&, ParamStore<S>&,       \
                                          const PolicyConfig&,                 \
                                          std::span<const TspInstance>, Mode,  \
                                          ad::FloorCounter*);                  \
  template std::vector<HeatmapLogits> policy_heatmaps(                         \
      ParamStore<S>&, const PolicyConfig&, std::span<const TspInstance>,       \
      std::size_t);                                                            \
  template ad::Var<S> weighted_trajectory_logprob(                             \
      ad::Var<S>, std::span<const std::vector<int>>, std::span<const double>);

STSP_INSTANTIATE_POLICY(float)
STSP_INSTANTIATE_POLICY(double)

#undef STSP_INSTANTIATE_POLICY

}  // namespace stsp
