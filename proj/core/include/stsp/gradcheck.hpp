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

#include <functional>
#include <string>
#include <vector>

#include "stsp/autodiff.hpp"

namespace stsp::ad {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Builds the scalar loss inside the given graph, reading parameters through
/// Graph::param. Must be deterministic in the parameter values.
template <typename S>
using LossBuilder = std::function<Var<S>(Graph<S>&)>;

/// Compares backward() gradients of every trainable entry against central
/// differences (f(p+h) - f(p-h)) / 2h. The relative error of one element is
/// |a - n| / max(|a|, |n|, 1e-12). Leaves the store's gradients zeroed and
/// its values untouched.
template <typename S>
GradCheckReport finite_difference_check(const LossBuilder<S>& fn,
                                        ParamStore<S>& store, double step,
                                        double tolerance);

}  // namespace stsp::ad
