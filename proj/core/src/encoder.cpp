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

#include "stsp/encoder.hpp"

#include <cmath>
#include <vector>

namespace stsp {
namespace {

std::string layer_name(std::size_t layer, const char* suffix) {
  return "layer" + std::to_string(layer) + "." + suffix;
}

template <typename S>
Tensor<S> uniform_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<S> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (S& v : t.data) v = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

template <typename S>
void add_norm(ParamStore<S>& store, const std::string& prefix, std::size_t d) {
  store.add(prefix + ".gamma", Tensor<S>({1, d}, S(1)));
  store.add(prefix + ".beta", Tensor<S>({1, d}, S(0)));
  store.add(prefix + ".running_mean", Tensor<S>({1, d}, S(0)), false);
  store.add(prefix + ".running_var", Tensor<S>({1, d}, S(1)), false);
}

template <typename S>
ad::Var<S> normalize(ad::Graph<S>& g, ad::Var<S> x, const std::string& prefix,
                     ParamStore<S>& params, const EncoderConfig& config,
                     Mode mode) {
  if (config.normalization == Normalization::none) return x;
  ad::BatchNormArgs<S> args;
  args.gamma = g.param(params, prefix + ".gamma");
  args.beta = g.param(params, prefix + ".beta");
  args.running_mean = &params.at(prefix + ".running_mean").value;
  args.running_var = &params.at(prefix + ".running_var").value;
  args.training = mode == Mode::train;
  return ad::batch_normalize(x, args);
}

template <typename S>
bool has_nan(const Tensor<S>& t) {
  for (S v : t.data) {
    if (std::isnan(v)) return true;
  }
  return false;
}

}  // namespace

void EncoderConfig::validate() const {
  if (d == 0) throw ConfigError("encoder: d > 0");
  if (layers < 1) throw ConfigError("encoder: layers >= 1");
  if (heads < 1) throw ConfigError("encoder: heads >= 1");
  if (d % heads != 0) throw ConfigError("encoder: heads must divide d");
  if (!(tanh_scale > 0.0)) throw ConfigError("encoder: tanh_scale (C) > 0");
}

std::size_t count_params(const EncoderConfig& c) {
  c.validate();
  const std::size_t d = c.d;
  std::size_t per_layer = 4 * d * d;
  const std::size_t norm = c.normalization == Normalization::batch ? 2 * d : 0;
  per_layer += norm;
  if (c.feed_forward) per_layer += d * 4 * d + 4 * d + 4 * d * d + d + norm;
  return 2 * d + d + c.layers * per_layer + 2 * d * d;
}

template <typename S>
void init_encoder_params(ParamStore<S>& store, const EncoderConfig& config,
                         Rng& rng) {
  config.validate();
  const std::size_t d = config.d;
  store.add("embed.weight", uniform_weight<S>({2, d}, 2, rng));
  store.add("embed.bias", Tensor<S>({1, d}, S(0)));
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      store.add(layer_name(l, w), uniform_weight<S>({d, d}, d, rng));
    }
    if (config.normalization == Normalization::batch) {
      add_norm(store, layer_name(l, "norm1"), d);
    }
    if (config.feed_forward) {
      store.add(layer_name(l, "ff.w1"), uniform_weight<S>({d, 4 * d}, d, rng));
      store.add(layer_name(l, "ff.b1"), Tensor<S>({1, 4 * d}, S(0)));
      store.add(layer_name(l, "ff.w2"), uniform_weight<S>({4 * d, d}, 4 * d, rng));
      store.add(layer_name(l, "ff.b2"), Tensor<S>({1, d}, S(0)));
      if (config.normalization == Normalization::batch) {
        add_norm(store, layer_name(l, "norm2"), d);
      }
    }
  }
  store.add("head.wa", uniform_weight<S>({d, d}, d, rng));
  store.add("head.wb", uniform_weight<S>({d, d}, d, rng));
}

template <typename S>
Tensor<S> stack_coords(std::span<const TspInstance> batch) {
  if (batch.empty()) throw ConfigError("empty instance batch");
  const std::size_t n = batch.front().size();
  Tensor<S> coords({batch.size() * n, 2});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].size() != n) {
      throw ConfigError("all instances of a batch must have the same size");
    }
    for (std::size_t i = 0; i < n; ++i) {
      coords.at(b * n + i, 0) = static_cast<S>(batch[b][i].x);
      coords.at(b * n + i, 1) = static_cast<S>(batch[b][i].y);
    }
  }
  return coords;
}

template <typename S>
ad::Var<S> embed_input(ad::Graph<S>& g, std::span<const TspInstance> batch,
                       ParamStore<S>& params) {
  ad::Var<S> x = g.constant(stack_coords<S>(batch));
  return ad::add(ad::matmul(x, g.param(params, "embed.weight")),
                 g.param(params, "embed.bias"));
}

template <typename S>
ad::Var<S> attention_layer(ad::Graph<S>& g, ad::Var<S> h, std::size_t layer,
                           std::size_t batch, ParamStore<S>& params,
                           const EncoderConfig& config, Mode mode) {
  const std::size_t d = config.d;
  if (h.shape().size() != 2 || h.shape()[1] != d || batch == 0 ||
      h.shape()[0] % batch != 0) {
    throw ConfigError("attention_layer: input shape " + shape_string(h.shape()) +
                      " does not match d=" + std::to_string(d));
  }
  const std::size_t n = h.shape()[0] / batch;
  const std::size_t width = d / config.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width));

  ad::Var<S> q = ad::matmul(h, g.param(params, layer_name(layer, "wq")));
  ad::Var<S> k = ad::matmul(h, g.param(params, layer_name(layer, "wk")));
  ad::Var<S> v = ad::matmul(h, g.param(params, layer_name(layer, "wv")));

  std::vector<ad::Var<S>> heads;
  heads.reserve(config.heads);
  for (std::size_t i = 0; i < config.heads; ++i) {
    auto split = [&](ad::Var<S> m) {
      ad::Var<S> part = config.heads == 1 ? m : ad::slice_cols(m, i * width, width);
      return ad::reshape(part, {batch, n, width});
    };
    ad::Var<S> scores =
        ad::scale(ad::matmul(split(q), ad::transpose(split(k))), inv_sqrt);
    ad::Var<S> attn = ad::softmax_rows(scores);
    if (has_nan(attn.value())) {
      throw NumericalDomainError("attention layer " + std::to_string(layer) +
                                 ": NaN in attention scores");
    }
    heads.push_back(ad::reshape(ad::matmul(attn, split(v)), {batch * n, width}));
  }
  ad::Var<S> merged = heads.size() == 1 ? heads[0]
                                        : ad::concat_cols<S>(std::span(heads));
  ad::Var<S> attended =
      ad::matmul(merged, g.param(params, layer_name(layer, "wo")));
  ad::Var<S> out = normalize(g, ad::add(h, attended), layer_name(layer, "norm1"),
                             params, config, mode);
  if (!config.feed_forward) return out;

  ad::Var<S> hidden = ad::relu(
      ad::add(ad::matmul(out, g.param(params, layer_name(layer, "ff.w1"))),
              g.param(params, layer_name(layer, "ff.b1"))));
  ad::Var<S> ff =
      ad::add(ad::matmul(hidden, g.param(params, layer_name(layer, "ff.w2"))),
              g.param(params, layer_name(layer, "ff.b2")));
  return normalize(g, ad::add(out, ff), layer_name(layer, "norm2"), params,
                   config, mode);
}

template <typename S>
ad::Var<S> encode(ad::Graph<S>& g, std::span<const TspInstance> batch,
                  ParamStore<S>& params, const EncoderConfig& config, Mode mode) {
  config.validate();
  ad::Var<S> h = embed_input(g, batch, params);
  for (std::size_t l = 0; l < config.layers; ++l) {
    h = attention_layer(g, h, l, batch.size(), params, config, mode);
  }
  return h;
}

template <typename S>
ad::Var<S> heatmap_head(ad::Graph<S>& g, ad::Var<S> h, std::size_t batch,
                        ParamStore<S>& params, const EncoderConfig& config) {
  const std::size_t d = config.d;
  if (h.shape().size() != 2 || h.shape()[1] != d || batch == 0 ||
      h.shape()[0] % batch != 0) {
    throw ConfigError("heatmap_head: input shape " + shape_string(h.shape()));
  }
  const std::size_t n = h.shape()[0] / batch;
  ad::Var<S> a = ad::reshape(
      ad::matmul(h, ad::transpose(g.param(params, "head.wa"))), {batch, n, d});
  ad::Var<S> b = ad::reshape(
      ad::matmul(h, ad::transpose(g.param(params, "head.wb"))), {batch, n, d});
  ad::Var<S> m = ad::scale(ad::matmul(a, ad::transpose(b)),
                           1.0 / std::sqrt(static_cast<double>(d)));
  return ad::scale(ad::tanh(m), config.tanh_scale);
}

#define STSP_INSTANTIATE_ENCODER(S)                                          \
  template void init_encoder_params(ParamStore<S>&, const EncoderConfig&,    \
                                    Rng&);                                   \
  template Tensor<S> stack_coords(std::span<const TspInstance>);             \
  template ad::Var<S> embed_input(ad::Graph<S>&, std::span<const TspInstance>, \
                                  ParamStore<S>&);                           \
  template ad::Var<S> attention_layer(ad::Graph<S>&, ad::Var<S>, std::size_t, \
                                      std::size_t, ParamStore<S>&,           \
                                      const EncoderConfig&, Mode);           \
  template ad::Var<S> encode(ad::Graph<S>&, std::span<const TspInstance>,    \
                             ParamStore<S>&, const EncoderConfig&, Mode);    \
  template ad::Var<S> heatmap_head(ad::Graph<S>&, ad::Var<S>, std::size_t,   \
                                   ParamStore<S>&, const EncoderConfig&);

STSP_INSTANTIATE_ENCODER(float)
STSP_INSTANTIATE_ENCODER(double)

#undef STSP_INSTANTIATE_ENCODER

}  // namespace stsp
