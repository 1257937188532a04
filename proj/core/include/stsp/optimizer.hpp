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

#include "stsp/param_store.hpp"

namespace stsp {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global L2 bound on the gradient; <= 0 disables clipping.
  double clip_norm = 1.0;
};

/// L2 norm over the gradients of all trainable entries.
template <typename S>
double global_grad_norm(const ParamStore<S>& store);

/// Rescales gradients so their global norm is at most max_norm. Returns the
/// norm before clipping.
template <typename S>
double clip_grad_norm(ParamStore<S>& store, double max_norm);

/// Clip, bias-corrected Adam update of trainable entries, then zero all
/// gradients. Returns the pre-clip gradient norm.
template <typename S>
double adam_step(ParamStore<S>& store, const AdamConfig& config);

}  // namespace stsp
