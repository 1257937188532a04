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

// Heatmap decoders: P_tanh (n x n scores, batched as (B, n, n)) to per-row
// log-probabilities P_logits.
//
// The Sinkhorn head treats P_tanh as a transport cost:
//
//   K = exp(-lambda * P_tanh),  u = v = 1/n
//   repeat I times:  v = 1 ./ (K^T u);  u = 1 ./ (K v)
//   P = diag(u) K diag(v),  P_logits = log P
//
// The updates target marginals of ones. Because the last update is the
// u-step, every row of P sums to one regardless of I; columns approach one
// as I grows. Every step is a graph op, so gradients flow through the
// unrolled iterations.

#pragma once

#include <filesystem>
#include <vector>

#include "stsp/autodiff.hpp"

namespace stsp {

enum class DecoderKind { softmax, sinkhorn };

struct SinkhornConfig {
  /// Entropic regularisation strength; larger is closer to an assignment.
  double lambda = 2.0;
  std::size_t iterations = 1;
  /// Floor applied before divisions and the final log.
  double epsilon = 1e-30;
  /// Log-sum-exp updates instead of kernel products; for large lambda.
  bool log_domain = false;

  void validate() const;
};

/// Row-wise log-softmax of P_tanh.
template <typename S>
ad::Var<S> softmax_decode(ad::Var<S> p_tanh);

/// `warnings` counts floor events. `mask_diagonal` adds a prohibitive cost
/// to self-loops before the kernel is formed.
template <typename S>
ad::Var<S> sinkhorn_decode(ad::Var<S> p_tanh, const SinkhornConfig& config,
                           ad::FloorCounter* warnings = nullptr,
                           bool mask_diagonal = false);

/// Value-level view of one instance's decoder output.
struct HeatmapLogits {
  Tensor<double> logits;  // (n, n)
  Tensor<double> probs;   // exp(logits)
};

/// Splits a (B, n, n) or (n, n) logits tensor per instance.
template <typename S>
std::vector<HeatmapLogits> split_heatmaps(const Tensor<S>& logits);

/// h(P) = -sum p log p with 0 log 0 = 0. Diagnostic only.
double transport_entropy(const Tensor<double>& p);

/// CSV, one matrix row per line, 9 significant digits. With mask_diagonal
/// the diagonal cells are left empty.
void dump_heatmap(const Tensor<double>& p, const std::filesystem::path& path,
                  bool mask_diagonal = false);
/// Parses a dump_heatmap file; empty cells read back as NaN.
Tensor<double> read_heatmap_csv(const std::filesystem::path& path);

}  // namespace stsp
