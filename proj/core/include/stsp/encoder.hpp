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

// Self-attention encoder over city coordinates and the outer-product
// heatmap head.
//
// Instances of one batch share n and are processed as a single (B*n, d)
// matrix; projections are shared matmuls and attention runs per instance
// through batched (B, n, n) products. No positional information is added,
// so the encoder is permutation equivariant in evaluation mode.
//
// Parameter names:
//   embed.weight (2, d)            embed.bias (1, d)
//   layer<l>.wq|wk|wv|wo (d, d)
//   layer<l>.norm1.gamma|beta (1, d), .running_mean|running_var (buffers)
//   layer<l>.ff.w1 (d, 4d) ff.b1 (1, 4d) ff.w2 (4d, d) ff.b2 (1, d)
//   layer<l>.norm2.*               head.wa (d, d)  head.wb (d, d)

#pragma once

#include <span>
#include <string>

#include "stsp/autodiff.hpp"
#include "stsp/rng.hpp"
#include "stsp/tsp.hpp"

namespace stsp {

enum class Normalization { batch, none };
enum class Mode { train, eval };

struct EncoderConfig {
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  /// Multiplier on the tanh output of the heatmap head.
  double tanh_scale = 10.0;
  Normalization normalization = Normalization::batch;
  /// Adds the d -> 4d -> d ReLU sublayer to every attention layer.
  bool feed_forward = true;

  void validate() const;
};

/// Trainable scalar count implied by the configuration.
std::size_t count_params(const EncoderConfig& config);

/// Adds every encoder and head entry, weights uniform in
/// (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases and shifts zero, scales one.
template <typename S>
void init_encoder_params(ParamStore<S>& store, const EncoderConfig& config,
                         Rng& rng);

/// Stacks instance coordinates into a (B*n, 2) tensor.
template <typename S>
Tensor<S> stack_coords(std::span<const TspInstance> batch);

/// H0 = coords * W_in + b_in.  Result (B*n, d).
template <typename S>
ad::Var<S> embed_input(ad::Graph<S>& g, std::span<const TspInstance> batch,
                       ParamStore<S>& params);

template <typename S>
ad::Var<S> attention_layer(ad::Graph<S>& g, ad::Var<S> h, std::size_t layer,
                           std::size_t batch, ParamStore<S>& params,
                           const EncoderConfig& config, Mode mode);

/// Final-layer representations, (B*n, d).
template <typename S>
ad::Var<S> encode(ad::Graph<S>& g, std::span<const TspInstance> batch,
                  ParamStore<S>& params, const EncoderConfig& config, Mode mode);

/// P_tanh = C * tanh((H W_A^T)(H W_B^T)^T / sqrt(d)), shape (B, n, n).
template <typename S>
ad::Var<S> heatmap_head(ad::Graph<S>& g, ad::Var<S> h, std::size_t batch,
                        ParamStore<S>& params, const EncoderConfig& config);

}  // namespace stsp
