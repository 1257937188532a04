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

#include "stsp/decoder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace stsp {
namespace {

// View an (n, n) input as (1, n, n).
template <typename S>
std::pair<ad::Var<S>, bool> as_batched(ad::Var<S> p) {
  const Shape& s = p.shape();
  if (s.size() == 2 && s[0] == s[1]) return {ad::reshape(p, {1, s[0], s[1]}), true};
  if (s.size() == 3 && s[1] == s[2]) return {p, false};
  throw ConfigError("decoder: expected square heatmap, got " + shape_string(s));
}

template <typename S>
void check_finite(const Tensor<S>& t, const char* op) {
  for (S v : t.data) {
    if (std::isnan(v)) throw NumericalDomainError(std::string(op) + ": NaN produced");
  }
}

std::vector<std::uint8_t> diagonal_mask(std::size_t batch, std::size_t n) {
  std::vector<std::uint8_t> mask(batch * n * n, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) mask[b * n * n + i * n + i] = 1;
  }
  return mask;
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("sinkhorn: lambda > 0");
  if (iterations < 1) throw ConfigError("sinkhorn: iterations >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) {
    throw ConfigError("sinkhorn: epsilon in (0, 1e-6]");
  }
}

template <typename S>
ad::Var<S> softmax_decode(ad::Var<S> p_tanh) {
  as_batched(p_tanh);
  ad::Var<S> out = ad::log_softmax_rows(p_tanh);
  check_finite(out.value(), "softmax_decode");
  return out;
}

template <typename S>
ad::Var<S> sinkhorn_decode(ad::Var<S> p_tanh, const SinkhornConfig& config,
                           ad::FloorCounter* warnings, bool mask_diagonal) {
  config.validate();
  auto [p, squeezed] = as_batched(p_tanh);
  ad::Graph<S>& g = p.graph();
  const Shape original = p_tanh.shape();
  const std::size_t batch = p.shape()[0];
  const std::size_t n = p.shape()[1];
  if (mask_diagonal) p = ad::masked_fill(p, diagonal_mask(batch, n), 1e9);

  const S uniform = static_cast<S>(1.0 / static_cast<double>(n));
  ad::Var<S> logits;
  if (config.log_domain) {
    ad::Var<S> log_kernel = ad::scale(p, -config.lambda);
    ad::Var<S> log_u = g.constant(Tensor<S>({batch, n, 1}, std::log(uniform)));
    ad::Var<S> log_v;
    for (std::size_t it = 0; it < config.iterations; ++it) {
      log_v = ad::scale(
          ad::logsumexp_rows(ad::transpose(ad::add(log_kernel, log_u))), -1.0);
      log_u = ad::scale(
          ad::logsumexp_rows(ad::add(log_kernel, ad::transpose(log_v))), -1.0);
    }
    logits = ad::add(ad::add(log_kernel, log_u), ad::transpose(log_v));
  } else {
    const double eps = config.epsilon;
    ad::Var<S> kernel = ad::exp(ad::scale(p, -config.lambda));
    ad::Var<S> ones = g.constant(Tensor<S>({batch, n, 1}, S(1)));
    ad::Var<S> u = g.constant(Tensor<S>({batch, n, 1}, uniform));
    ad::Var<S> v = g.constant(Tensor<S>({batch, n, 1}, uniform));
    for (std::size_t it = 0; it < config.iterations; ++it) {
      v = ad::div(ones, ad::clamp_min(ad::matmul(ad::transpose(kernel), u), eps,
                                      warnings));
      u = ad::div(ones, ad::clamp_min(ad::matmul(kernel, v), eps, warnings));
    }
    ad::Var<S> plan = ad::mul(ad::mul(kernel, u), ad::transpose(v));
    logits = ad::log(ad::clamp_min(plan, eps, warnings));
  }
  check_finite(logits.value(), "sinkhorn_decode");
  return squeezed ? ad::reshape(logits, original) : logits;
}

template <typename S>
std::vector<HeatmapLogits> split_heatmaps(const Tensor<S>& logits) {
  const Shape& s = logits.shape;
  std::size_t batch = 1;
  std::size_t n = 0;
  if (s.size() == 2 && s[0] == s[1]) {
    n = s[0];
  } else if (s.size() == 3 && s[1] == s[2]) {
    batch = s[0];
    n = s[1];
  } else {
    throw ConfigError("split_heatmaps: expected square heatmaps, got " +
                      shape_string(s));
  }
  std::vector<HeatmapLogits> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out[b].logits = Tensor<double>({n, n});
    out[b].probs = Tensor<double>({n, n});
    for (std::size_t i = 0; i < n * n; ++i) {
      const double l = static_cast<double>(logits[b * n * n + i]);
      out[b].logits[i] = l;
      out[b].probs[i] = std::exp(l);
    }
  }
  return out;
}

double transport_entropy(const Tensor<double>& p) {
  double h = 0.0;
  for (double v : p.data) {
    if (v < 0.0 || std::isnan(v)) {
      throw InvalidInputError("transport_entropy: negative or NaN entry");
    }
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

void dump_heatmap(const Tensor<double>& p, const std::filesystem::path& path,
                  bool mask_diagonal) {
  if (p.rank() != 2) throw ConfigError("dump_heatmap: expected a matrix");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::size_t rows = p.dim(0);
  const std::size_t cols = p.dim(1);
  char buf[32];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c > 0) out << ',';
      if (mask_diagonal && r == c) continue;
      std::snprintf(buf, sizeof(buf), "%.9g", p.at(r, c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor<double> read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma - start);
      values.push_back(cell.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : std::stod(cell));
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 1) cols = count;
    if (count != cols) throw ParseError("ragged heatmap row", rows);
  }
  return Tensor<double>({rows, cols}, std::move(values));
}

#define STSP_INSTANTIATE_DECODER(S)                                           \
  template ad::Var<S> softmax_decode(ad::Var<S>);                             \
  template ad::Var<S> sinkhorn_decode(ad::Var<S>, const SinkhornConfig&,      \
                                      ad::FloorCounter*, bool);               \
  template std::vector<HeatmapLogits> split_heatmaps(const Tensor<S>&);

STSP_INSTANTIATE_DECODER(float)
STSP_INSTANTIATE_DECODER(double)

#undef STSP_INSTANTIATE_DECODER

}  // namespace stsp
