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

// Tape-based reverse-mode differentiation over dense tensors.
//
// A Graph owns every node created while building an expression. Nodes are
// appended in evaluation order, so the tape is already topologically sorted
// and backward() is a single reverse sweep. Leaves bound to a ParamStore
// entry add their gradient into that entry on every backward() call; the
// store is only cleared by ParamStore::zero_grad().
//
// Binary elementwise ops broadcast between operands of equal rank whose
// dimensions are either equal or 1. That covers bias rows (1, C), Sinkhorn
// scaling vectors (B, n, 1) / (B, 1, n), and nothing more.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "stsp/param_store.hpp"
#include "stsp/tensor.hpp"

namespace stsp::ad {

template <typename S>
class Graph;

template <typename S>
class Var {
 public:
  Var() = default;

  Graph<S>& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Tensor<S>& value() const;
  const Shape& shape() const { return value().shape; }

 private:
  friend class Graph<S>;
  Var(Graph<S>* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph<S>* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

template <typename S>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t)>;

  /// With grad_enabled == false no backward closures are recorded; use for
  /// inference-only passes.
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<S> constant(Tensor<S> value);
  /// Free leaf that receives a gradient readable through grad().
  Var<S> variable(Tensor<S> value);
  /// Leaf bound to a store entry. Non-trainable entries act as constants.
  Var<S> param(ParamStore<S>& store, std::string_view name);

  void backward(Var<S> loss);

  const Tensor<S>& value(std::uint32_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() loss with respect to `v`; zeros if the
  /// node was not reached.
  Tensor<S> grad(Var<S> v) const;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  bool requires_grad(std::uint32_t id) const {
    return nodes_[id].requires_grad;
  }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  // Op-author interface.
  Var<S> record(Tensor<S> value, std::vector<std::uint32_t> parents,
                BackwardFn backward);
  /// Gradient flowing into node `id` during the reverse sweep.
  const Tensor<S>& out_grad(std::uint32_t id) const { return nodes_[id].grad; }
  /// Zero-initialised (on first touch) gradient buffer of node `id`.
  Tensor<S>& grad_buffer(std::uint32_t id);

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    std::vector<std::uint32_t> parents;
    BackwardFn backward;
    ParamEntry<S>* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var<S> push(Node node);

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

template <typename S>
const Tensor<S>& Var<S>::value() const {
  return graph_->value(id_);
}

/// Counts entries raised to a floor by clamp_min.
struct FloorCounter {
  std::size_t calls_floored = 0;
  std::size_t entries_floored = 0;
};

template <typename S>
struct BatchNormArgs {
  Var<S> gamma;  // (1, C)
  Var<S> beta;   // (1, C)
  Tensor<S>* running_mean = nullptr;
  Tensor<S>* running_var = nullptr;
  bool training = false;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Additive constant used to mask logits.
inline constexpr double kMaskFill = -1e9;

// (m,k)x(k,n) or batched (B,m,k)x(B,k,n).
template <typename S> Var<S> matmul(Var<S> a, Var<S> b);
template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
template <typename S> Var<S> mul(Var<S> a, Var<S> b);
template <typename S> Var<S> div(Var<S> a, Var<S> b);
template <typename S> Var<S> exp(Var<S> a);
template <typename S> Var<S> log(Var<S> a);
template <typename S> Var<S> tanh(Var<S> a);
template <typename S> Var<S> relu(Var<S> a);
template <typename S> Var<S> scale(Var<S> a, double factor);
/// Softmax along the last axis, max-subtracted.
template <typename S> Var<S> softmax_rows(Var<S> a);
template <typename S> Var<S> log_softmax_rows(Var<S> a);
/// log-sum-exp along the last axis; the last dimension becomes 1.
template <typename S> Var<S> logsumexp_rows(Var<S> a);
/// Swaps the last two axes (rank 2 or 3).
template <typename S> Var<S> transpose(Var<S> a);
template <typename S> Var<S> reshape(Var<S> a, Shape shape);
/// Rows of a 2-D tensor; indices may repeat.
template <typename S>
Var<S> gather_rows(Var<S> a, std::span<const std::uint32_t> rows);
/// out = a + fill * mask. mask holds one 0/1 flag per element.
template <typename S>
Var<S> masked_fill(Var<S> a, std::span<const std::uint8_t> mask,
                   double fill = kMaskFill);
template <typename S> Var<S> reduce_sum(Var<S> a);
template <typename S> Var<S> reduce_mean(Var<S> a);
template <typename S>
Var<S> slice_cols(Var<S> a, std::size_t start, std::size_t width);
template <typename S> Var<S> concat_cols(std::span<const Var<S>> parts);
/// max(a, floor) elementwise; floored entries pass no gradient.
template <typename S>
Var<S> clamp_min(Var<S> a, double floor, FloorCounter* counter = nullptr);
/// Per-channel normalisation of a 2-D (rows, C) input over its rows.
template <typename S>
Var<S> batch_normalize(Var<S> x, const BatchNormArgs<S>& args);

}  // namespace stsp::ad
