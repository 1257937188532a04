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

#include "stsp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace stsp::ad {

template <typename S>
GradCheckReport finite_difference_check(const LossBuilder<S>& fn,
                                        ParamStore<S>& store, double step,
                                        double tolerance) {
  if (!(step > 0.0)) throw ConfigError("finite_difference_check: step > 0");

  store.zero_grad();
  {
    Graph<S> g;
    g.backward(fn(g));
  }

  auto evaluate = [&fn]() {
    Graph<S> g(false);
    return static_cast<double>(fn(g).value().item());
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, entry] : store.entries()) {
    if (!entry.trainable) continue;
    GradCheckEntry result;
    result.name = name;
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const S original = entry.value[i];
      entry.value[i] = static_cast<S>(original + step);
      const double up = evaluate();
      entry.value[i] = static_cast<S>(original - step);
      const double down = evaluate();
      entry.value[i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double analytic = static_cast<double>(entry.grad[i]);
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > result.max_rel_error || i == 0) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        if (rel >= result.max_rel_error) {
          result.worst_index = i;
          result.analytic = analytic;
          result.numeric = numeric;
        }
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, result.max_rel_error);
    report.entries.push_back(std::move(result));
  }
  store.zero_grad();
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

template GradCheckReport finite_difference_check<float>(const LossBuilder<float>&,
                                                        ParamStore<float>&,
                                                        double, double);
template GradCheckReport finite_difference_check<double>(
    const LossBuilder<double>&, ParamStore<double>&, double, double);

}  // namespace stsp::ad
