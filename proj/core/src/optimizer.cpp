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

#include "stsp/optimizer.hpp"

#include <cmath>

namespace stsp {

template <typename S>
double global_grad_norm(const ParamStore<S>& store) {
  double sq = 0.0;
  for (const auto& [_, e] : store.entries()) {
    if (!e.trainable) continue;
    for (S g : e.grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename S>
double clip_grad_norm(ParamStore<S>& store, double max_norm) {
  const double norm = global_grad_norm(store);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [_, e] : store.entries()) {
      if (!e.trainable) continue;
      for (S& g : e.grad.data) g = static_cast<S>(static_cast<double>(g) * factor);
    }
  }
  return norm;
}

template <typename S>
double adam_step(ParamStore<S>& store, const AdamConfig& config) {
  const double norm = clip_grad_norm(store, config.clip_norm);
  const std::uint64_t t = ++store.optimizer_step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (auto& [_, e] : store.entries()) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = static_cast<double>(e.grad[i]);
      const double m = config.beta1 * static_cast<double>(e.first_moment[i]) +
                       (1.0 - config.beta1) * g;
      const double v = config.beta2 * static_cast<double>(e.second_moment[i]) +
                       (1.0 - config.beta2) * g * g;
      e.first_moment[i] = static_cast<S>(m);
      e.second_moment[i] = static_cast<S>(v);
      const double update =
          config.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + config.eps);
      e.value[i] = static_cast<S>(static_cast<double>(e.value[i]) - update);
    }
  }
  store.zero_grad();
  return norm;
}

template double global_grad_norm(const ParamStore<float>&);
template double global_grad_norm(const ParamStore<double>&);
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);
template double adam_step(ParamStore<float>&, const AdamConfig&);
template double adam_step(ParamStore<double>&, const AdamConfig&);

}  // namespace stsp
