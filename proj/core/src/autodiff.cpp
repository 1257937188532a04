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

#include "stsp/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stsp::ad {
namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Map = Eigen::Map<RowMat<S>>;
template <typename S>
using CMap = Eigen::Map<const RowMat<S>>;

[[noreturn]] void shape_error(const char* op, const Shape& a,
                              const Shape& b = {}) {
  std::string msg = std::string(op) + ": incompatible shape " + shape_string(a);
  if (!b.empty()) msg += " vs " + shape_string(b);
  throw ConfigError(msg);
}

template <typename S>
void check_same_graph(const Var<S>& a, const Var<S>& b, const char* op) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) {
    throw ConfigError(std::string(op) + ": operands belong to different graphs");
  }
}

// Equal-rank broadcasting padded to three axes.
struct Layout {
  Shape out;
  std::size_t dims[3] = {1, 1, 1};
  std::size_t sa[3] = {0, 0, 0};
  std::size_t sb[3] = {0, 0, 0};
  bool same = false;
};

Layout broadcast_layout(const Shape& a, const Shape& b, const char* op) {
  Layout l;
  if (a == b) {
    l.out = a;
    l.same = true;
    return l;
  }
  if (a.size() != b.size() || a.empty() || a.size() > 3) shape_error(op, a, b);
  const std::size_t pad = 3 - a.size();
  std::size_t da[3] = {1, 1, 1};
  std::size_t db[3] = {1, 1, 1};
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[pad + i] = a[i];
    db[pad + i] = b[i];
  }
  l.out.resize(a.size());
  for (std::size_t i = 0; i < 3; ++i) {
    if (da[i] != db[i] && da[i] != 1 && db[i] != 1) shape_error(op, a, b);
    l.dims[i] = std::max(da[i], db[i]);
    if (i >= pad) l.out[i - pad] = l.dims[i];
  }
  std::size_t stride_a = 1;
  std::size_t stride_b = 1;
  for (int i = 2; i >= 0; --i) {
    l.sa[i] = da[i] == 1 ? 0 : stride_a;
    l.sb[i] = db[i] == 1 ? 0 : stride_b;
    stride_a *= da[i];
    stride_b *= db[i];
  }
  return l;
}

template <typename Fn>
void for_each_index(const Layout& l, std::size_t count, Fn&& fn) {
  if (l.same) {
    for (std::size_t i = 0; i < count; ++i) fn(i, i, i);
    return;
  }
  std::size_t o = 0;
  for (std::size_t i = 0; i < l.dims[0]; ++i) {
    for (std::size_t j = 0; j < l.dims[1]; ++j) {
      const std::size_t ba = i * l.sa[0] + j * l.sa[1];
      const std::size_t bb = i * l.sb[0] + j * l.sb[1];
      for (std::size_t k = 0; k < l.dims[2]; ++k) {
        fn(o++, ba + k * l.sa[2], bb + k * l.sb[2]);
      }
    }
  }
}

// Forward f(x, y); partials da(x, y, out) and db(x, y, out).
template <typename S, typename F, typename DA, typename DB>
Var<S> binary(Var<S> a, Var<S> b, const char* op, F f, DA da, DB db) {
  check_same_graph(a, b, op);
  Graph<S>& g = a.graph();
  const Layout l = broadcast_layout(a.shape(), b.shape(), op);
  Tensor<S> out(l.out);
  {
    const S* av = a.value().ptr();
    const S* bv = b.value().ptr();
    S* ov = out.ptr();
    for_each_index(l, out.size(),
                   [&](std::size_t o, std::size_t ia, std::size_t ib) {
                     ov[o] = f(av[ia], bv[ib]);
                   });
  }
  const std::uint32_t ida = a.id();
  const std::uint32_t idb = b.id();
  return g.record(std::move(out), {ida, idb},
                  [l, ida, idb, da, db](Graph<S>& gr, std::uint32_t self) {
                    const S* av = gr.value(ida).ptr();
                    const S* bv = gr.value(idb).ptr();
                    const S* ov = gr.value(self).ptr();
                    const S* go = gr.out_grad(self).ptr();
                    const std::size_t count = gr.value(self).size();
                    if (gr.requires_grad(ida)) {
                      S* ga = gr.grad_buffer(ida).ptr();
                      for_each_index(l, count, [&](std::size_t o, std::size_t ia,
                                                   std::size_t ib) {
                        ga[ia] += go[o] * da(av[ia], bv[ib], ov[o]);
                      });
                    }
                    if (gr.requires_grad(idb)) {
                      S* gb = gr.grad_buffer(idb).ptr();
                      for_each_index(l, count, [&](std::size_t o, std::size_t ia,
                                                   std::size_t ib) {
                        gb[ib] += go[o] * db(av[ia], bv[ib], ov[o]);
                      });
                    }
                  });
}

// Forward f(x); derivative d(x, out).
template <typename S, typename F, typename D>
Var<S> unary(Var<S> a, F f, D d) {
  Graph<S>& g = a.graph();
  Tensor<S> out(a.shape());
  const S* av = a.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  const std::uint32_t ida = a.id();
  return g.record(std::move(out), {ida},
                  [ida, d](Graph<S>& gr, std::uint32_t self) {
                    const S* xv = gr.value(ida).ptr();
                    const S* ov = gr.value(self).ptr();
                    const S* go = gr.out_grad(self).ptr();
                    S* ga = gr.grad_buffer(ida).ptr();
                    const std::size_t count = gr.value(self).size();
                    for (std::size_t i = 0; i < count; ++i) {
                      ga[i] += go[i] * d(xv[i], ov[i]);
                    }
                  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

template <typename S>
Var<S> Graph<S>::push(Node node) {
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("graph node limit exceeded");
  }
  nodes_.push_back(std::move(node));
  return Var<S>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename S>
Var<S> Graph<S>::constant(Tensor<S> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename S>
Var<S> Graph<S>::variable(Tensor<S> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <typename S>
Var<S> Graph<S>::param(ParamStore<S>& store, std::string_view name) {
  ParamEntry<S>& entry = store.at(name);
  Node n;
  n.value = entry.value;
  n.requires_grad = grad_enabled_ && entry.trainable;
  if (n.requires_grad) n.param = &entry;
  return push(std::move(n));
}

template <typename S>
Var<S> Graph<S>::record(Tensor<S> value, std::vector<std::uint32_t> parents,
                        BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (std::uint32_t p : parents) {
      if (nodes_[p].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.backward = std::move(backward);
  }
  return push(std::move(n));
}

template <typename S>
Tensor<S>& Graph<S>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor<S>(n.value.shape);
    n.has_grad = true;
  }
  return n.grad;
}

template <typename S>
Tensor<S> Graph<S>::grad(Var<S> v) const {
  const Node& n = nodes_.at(v.id());
  if (!n.has_grad) return Tensor<S>(n.value.shape);
  return n.grad;
}

template <typename S>
void Graph<S>::backward(Var<S> loss) {
  if (loss.value().size() != 1) {
    throw ConfigError("backward: loss must be scalar, got shape " +
                      shape_string(loss.shape()));
  }
  if (!grad_enabled_) throw ConfigError("backward: graph built without gradients");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<S>();
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = S(1);
  for (std::int64_t id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(id));
    if (n.param != nullptr) {
      ParamEntry<S>& e = *n.param;
      if (e.grad.shape != e.value.shape) e.grad = Tensor<S>(e.value.shape);
      for (std::size_t i = 0; i < e.grad.size(); ++i) e.grad[i] += n.grad[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Ops

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  check_same_graph(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  std::size_t batch = 1;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  Shape out_shape;
  if (sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0]) {
    m = sa[0];
    k = sa[1];
    n = sb[1];
    out_shape = {m, n};
  } else if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] &&
             sa[2] == sb[1]) {
    batch = sa[0];
    m = sa[1];
    k = sa[2];
    n = sb[2];
    out_shape = {batch, m, n};
  } else {
    shape_error("matmul", sa, sb);
  }
  Tensor<S> out(out_shape);
  const S* av = a.value().ptr();
  const S* bv = b.value().ptr();
  for (std::size_t i = 0; i < batch; ++i) {
    Map<S>(out.ptr() + i * m * n, m, n).noalias() =
        CMap<S>(av + i * m * k, m, k) * CMap<S>(bv + i * k * n, k, n);
  }
  const std::uint32_t ida = a.id();
  const std::uint32_t idb = b.id();
  return a.graph().record(
      std::move(out), {ida, idb},
      [=](Graph<S>& g, std::uint32_t self) {
        const S* go = g.out_grad(self).ptr();
        const S* av2 = g.value(ida).ptr();
        const S* bv2 = g.value(idb).ptr();
        if (g.requires_grad(ida)) {
          S* ga = g.grad_buffer(ida).ptr();
          for (std::size_t i = 0; i < batch; ++i) {
            Map<S>(ga + i * m * k, m, k).noalias() +=
                CMap<S>(go + i * m * n, m, n) *
                CMap<S>(bv2 + i * k * n, k, n).transpose();
          }
        }
        if (g.requires_grad(idb)) {
          S* gb = g.grad_buffer(idb).ptr();
          for (std::size_t i = 0; i < batch; ++i) {
            Map<S>(gb + i * k * n, k, n).noalias() +=
                CMap<S>(av2 + i * m * k, m, k).transpose() *
                CMap<S>(go + i * m * n, m, n);
          }
        }
      });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  return binary(
      a, b, "add", [](S x, S y) { return x + y; },
      [](S, S, S) { return S(1); }, [](S, S, S) { return S(1); });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  return binary(
      a, b, "sub", [](S x, S y) { return x - y; },
      [](S, S, S) { return S(1); }, [](S, S, S) { return S(-1); });
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  return binary(
      a, b, "mul", [](S x, S y) { return x * y; },
      [](S, S y, S) { return y; }, [](S x, S, S) { return x; });
}

template <typename S>
Var<S> div(Var<S> a, Var<S> b) {
  for (S y : b.value().data) {
    if (y == S(0)) throw NumericalDomainError("div: zero denominator");
  }
  return binary(
      a, b, "div", [](S x, S y) { return x / y; },
      [](S, S y, S) { return S(1) / y; },
      [](S, S y, S out) { return -out / y; });
}

template <typename S>
Var<S> exp(Var<S> a) {
  return unary(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log(Var<S> a) {
  for (S x : a.value().data) {
    if (!(x > S(0))) {
      throw NumericalDomainError("log: non-positive input " + std::to_string(x));
    }
  }
  return unary(
      a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <typename S>
Var<S> tanh(Var<S> a) {
  return unary(
      a, [](S x) { return std::tanh(x); },
      [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> relu(Var<S> a) {
  return unary(
      a, [](S x) { return x > S(0) ? x : S(0); },
      [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> scale(Var<S> a, double factor) {
  const S c = static_cast<S>(factor);
  return unary(
      a, [c](S x) { return c * x; }, [c](S, S) { return c; });
}

template <typename S>
Var<S> softmax_rows(Var<S> a) {
  const Tensor<S>& x = a.value();
  Tensor<S> out(x.shape);
  const std::size_t cols = x.cols();
  const std::size_t rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.ptr() + r * cols;
    S* yr = out.ptr() + r * cols;
    const S mx = *std::max_element(xr, xr + cols);
    S sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= sum;
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(
      std::move(out), {ida}, [=](Graph<S>& g, std::uint32_t self) {
        const S* y = g.value(self).ptr();
        const S* go = g.out_grad(self).ptr();
        S* ga = g.grad_buffer(ida).ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t o = r * cols;
          S dot = 0;
          for (std::size_t c = 0; c < cols; ++c) dot += go[o + c] * y[o + c];
          for (std::size_t c = 0; c < cols; ++c) {
            ga[o + c] += y[o + c] * (go[o + c] - dot);
          }
        }
      });
}

template <typename S>
Var<S> log_softmax_rows(Var<S> a) {
  const Tensor<S>& x = a.value();
  Tensor<S> out(x.shape);
  const std::size_t cols = x.cols();
  const std::size_t rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.ptr() + r * cols;
    S* yr = out.ptr() + r * cols;
    const S mx = *std::max_element(xr, xr + cols);
    S sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(xr[c] - mx);
    const S lse = mx + std::log(sum);
    for (std::size_t c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(
      std::move(out), {ida}, [=](Graph<S>& g, std::uint32_t self) {
        const S* y = g.value(self).ptr();
        const S* go = g.out_grad(self).ptr();
        S* ga = g.grad_buffer(ida).ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t o = r * cols;
          S total = 0;
          for (std::size_t c = 0; c < cols; ++c) total += go[o + c];
          for (std::size_t c = 0; c < cols; ++c) {
            ga[o + c] += go[o + c] - std::exp(y[o + c]) * total;
          }
        }
      });
}

template <typename S>
Var<S> logsumexp_rows(Var<S> a) {
  const Tensor<S>& x = a.value();
  Shape out_shape = x.shape;
  out_shape.back() = 1;
  Tensor<S> out(out_shape);
  const std::size_t cols = x.cols();
  const std::size_t rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.ptr() + r * cols;
    const S mx = *std::max_element(xr, xr + cols);
    S sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(xr[c] - mx);
    out[r] = mx + std::log(sum);
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(
      std::move(out), {ida}, [=](Graph<S>& g, std::uint32_t self) {
        const S* xv = g.value(ida).ptr();
        const S* y = g.value(self).ptr();
        const S* go = g.out_grad(self).ptr();
        S* ga = g.grad_buffer(ida).ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            ga[r * cols + c] += go[r] * std::exp(xv[r * cols + c] - y[r]);
          }
        }
      });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  const Shape& s = a.shape();
  if (s.size() != 2 && s.size() != 3) shape_error("transpose", s);
  const std::size_t batch = s.size() == 3 ? s[0] : 1;
  const std::size_t m = s[s.size() - 2];
  const std::size_t n = s[s.size() - 1];
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tensor<S> out(out_shape);
  const S* av = a.value().ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    Map<S>(out.ptr() + b * m * n, n, m) =
        CMap<S>(av + b * m * n, m, n).transpose();
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(
      std::move(out), {ida}, [=](Graph<S>& g, std::uint32_t self) {
        const S* go = g.out_grad(self).ptr();
        S* ga = g.grad_buffer(ida).ptr();
        for (std::size_t b = 0; b < batch; ++b) {
          Map<S>(ga + b * m * n, m, n) += CMap<S>(go + b * m * n, n, m).transpose();
        }
      });
}

template <typename S>
Var<S> reshape(Var<S> a, Shape shape) {
  if (numel(shape) != a.value().size()) shape_error("reshape", a.shape(), shape);
  Tensor<S> out(std::move(shape), a.value().data);
  const std::uint32_t ida = a.id();
  return a.graph().record(std::move(out), {ida},
                          [=](Graph<S>& g, std::uint32_t self) {
                            const Tensor<S>& go = g.out_grad(self);
                            S* ga = g.grad_buffer(ida).ptr();
                            for (std::size_t i = 0; i < go.size(); ++i) {
                              ga[i] += go[i];
                            }
                          });
}

template <typename S>
Var<S> gather_rows(Var<S> a, std::span<const std::uint32_t> rows) {
  const Shape& s = a.shape();
  if (s.size() != 2) shape_error("gather_rows", s);
  const std::size_t cols = s[1];
  Tensor<S> out({rows.size(), cols});
  const S* av = a.value().ptr();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= s[0]) {
      throw ConfigError("gather_rows: row index " + std::to_string(rows[r]) +
                        " out of range for shape " + shape_string(s));
    }
    std::copy_n(av + rows[r] * cols, cols, out.ptr() + r * cols);
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(
      std::move(out), {ida},
      [ida, cols, idx = std::vector<std::uint32_t>(rows.begin(), rows.end())](
          Graph<S>& g, std::uint32_t self) {
        const S* go = g.out_grad(self).ptr();
        S* ga = g.grad_buffer(ida).ptr();
        for (std::size_t r = 0; r < idx.size(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            ga[idx[r] * cols + c] += go[r * cols + c];
          }
        }
      });
}

template <typename S>
Var<S> masked_fill(Var<S> a, std::span<const std::uint8_t> mask, double fill) {
  const Tensor<S>& x = a.value();
  if (mask.size() != x.size()) {
    throw ConfigError("masked_fill: mask has " + std::to_string(mask.size()) +
                      " entries for shape " + shape_string(x.shape));
  }
  Tensor<S> out = x;
  const S f = static_cast<S>(fill);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i] != 0) out[i] += f;
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(std::move(out), {ida},
                          [=](Graph<S>& g, std::uint32_t self) {
                            const Tensor<S>& go = g.out_grad(self);
                            S* ga = g.grad_buffer(ida).ptr();
                            for (std::size_t i = 0; i < go.size(); ++i) {
                              ga[i] += go[i];
                            }
                          });
}

template <typename S>
Var<S> reduce_sum(Var<S> a) {
  S total = 0;
  for (S x : a.value().data) total += x;
  const std::uint32_t ida = a.id();
  return a.graph().record(Tensor<S>::scalar(total), {ida},
                          [=](Graph<S>& g, std::uint32_t self) {
                            const S go = g.out_grad(self)[0];
                            Tensor<S>& ga = g.grad_buffer(ida);
                            for (S& v : ga.data) v += go;
                          });
}

template <typename S>
Var<S> reduce_mean(Var<S> a) {
  const std::size_t count = a.value().size();
  if (count == 0) throw ConfigError("reduce_mean: empty input");
  return scale(reduce_sum(a), 1.0 / static_cast<double>(count));
}

template <typename S>
Var<S> slice_cols(Var<S> a, std::size_t start, std::size_t width) {
  const Shape& s = a.shape();
  if (s.size() != 2 || start + width > s[1] || width == 0) {
    shape_error("slice_cols", s);
  }
  const std::size_t rows = s[0];
  const std::size_t cols = s[1];
  Tensor<S> out({rows, width});
  const S* av = a.value().ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av + r * cols + start, width, out.ptr() + r * width);
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(
      std::move(out), {ida}, [=](Graph<S>& g, std::uint32_t self) {
        const S* go = g.out_grad(self).ptr();
        S* ga = g.grad_buffer(ida).ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < width; ++c) {
            ga[r * cols + start + c] += go[r * width + c];
          }
        }
      });
}

template <typename S>
Var<S> concat_cols(std::span<const Var<S>> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  const std::size_t rows = parts[0].shape().at(0);
  std::vector<std::size_t> widths;
  std::vector<std::uint32_t> ids;
  std::size_t total = 0;
  for (const Var<S>& p : parts) {
    check_same_graph(parts[0], p, "concat_cols");
    if (p.shape().size() != 2 || p.shape()[0] != rows) {
      shape_error("concat_cols", parts[0].shape(), p.shape());
    }
    widths.push_back(p.shape()[1]);
    ids.push_back(p.id());
    total += p.shape()[1];
  }
  Tensor<S> out({rows, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const S* pv = parts[i].value().ptr();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv + r * widths[i], widths[i], out.ptr() + r * total + offset);
    }
    offset += widths[i];
  }
  return parts[0].graph().record(
      std::move(out), ids, [=](Graph<S>& g, std::uint32_t self) {
        const S* go = g.out_grad(self).ptr();
        std::size_t off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (g.requires_grad(ids[i])) {
            S* gp = g.grad_buffer(ids[i]).ptr();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[i]; ++c) {
                gp[r * widths[i] + c] += go[r * total + off + c];
              }
            }
          }
          off += widths[i];
        }
      });
}

template <typename S>
Var<S> clamp_min(Var<S> a, double floor, FloorCounter* counter) {
  const S f = static_cast<S>(floor);
  Tensor<S> out = a.value();
  std::size_t floored = 0;
  for (S& v : out.data) {
    if (std::isnan(v)) throw NumericalDomainError("clamp_min: NaN input");
    if (v < f) {
      v = f;
      ++floored;
    }
  }
  if (counter != nullptr && floored > 0) {
    ++counter->calls_floored;
    counter->entries_floored += floored;
  }
  const std::uint32_t ida = a.id();
  return a.graph().record(std::move(out), {ida},
                          [=](Graph<S>& g, std::uint32_t self) {
                            const S* xv = g.value(ida).ptr();
                            const Tensor<S>& go = g.out_grad(self);
                            S* ga = g.grad_buffer(ida).ptr();
                            for (std::size_t i = 0; i < go.size(); ++i) {
                              if (!(xv[i] < f)) ga[i] += go[i];
                            }
                          });
}

template <typename S>
Var<S> batch_normalize(Var<S> x, const BatchNormArgs<S>& args) {
  check_same_graph(x, args.gamma, "batch_normalize");
  check_same_graph(x, args.beta, "batch_normalize");
  const Shape& s = x.shape();
  if (s.size() != 2) shape_error("batch_normalize", s);
  const std::size_t rows = s[0];
  const std::size_t cols = s[1];
  const Shape channel{1, cols};
  if (args.gamma.shape() != channel || args.beta.shape() != channel) {
    shape_error("batch_normalize", s, args.gamma.shape());
  }
  if (args.running_mean == nullptr || args.running_var == nullptr ||
      args.running_mean->shape != channel || args.running_var->shape != channel) {
    throw ConfigError("batch_normalize: running statistics missing or misshaped");
  }
  const bool training = args.training;
  if (training && rows < 2) {
    throw ConfigError("batch_normalize: training mode needs at least 2 rows");
  }
  const S eps = static_cast<S>(args.eps);
  const S* xv = x.value().ptr();
  const S* gv = args.gamma.value().ptr();
  const S* bv = args.beta.value().ptr();

  std::vector<S> mean(cols, S(0));
  std::vector<S> inv_std(cols, S(0));
  if (training) {
    std::vector<S> var(cols, S(0));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) mean[c] += xv[r * cols + c];
    }
    for (S& m : mean) m /= static_cast<S>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const S d = xv[r * cols + c] - mean[c];
        var[c] += d * d;
      }
    }
    const S mom = static_cast<S>(args.momentum);
    for (std::size_t c = 0; c < cols; ++c) {
      const S biased = var[c] / static_cast<S>(rows);
      inv_std[c] = S(1) / std::sqrt(biased + eps);
      const S unbiased = var[c] / static_cast<S>(rows - 1);
      (*args.running_mean)[c] = (S(1) - mom) * (*args.running_mean)[c] + mom * mean[c];
      (*args.running_var)[c] = (S(1) - mom) * (*args.running_var)[c] + mom * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < cols; ++c) {
      mean[c] = (*args.running_mean)[c];
      inv_std[c] = S(1) / std::sqrt((*args.running_var)[c] + eps);
    }
  }

  Tensor<S> xhat(s);
  Tensor<S> out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      xhat[i] = (xv[i] - mean[c]) * inv_std[c];
      out[i] = gv[c] * xhat[i] + bv[c];
    }
  }
  const std::uint32_t idx = x.id();
  const std::uint32_t idg = args.gamma.id();
  const std::uint32_t idb = args.beta.id();
  return x.graph().record(
      std::move(out), {idx, idg, idb},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph<S>& g, std::uint32_t self) {
        const S* go = g.out_grad(self).ptr();
        const S* gamma = g.value(idg).ptr();
        if (g.requires_grad(idg)) {
          S* gg = g.grad_buffer(idg).ptr();
          for (std::size_t i = 0; i < rows * cols; ++i) {
            gg[i % cols] += go[i] * xhat[i];
          }
        }
        if (g.requires_grad(idb)) {
          S* gb = g.grad_buffer(idb).ptr();
          for (std::size_t i = 0; i < rows * cols; ++i) gb[i % cols] += go[i];
        }
        if (!g.requires_grad(idx)) return;
        S* gx = g.grad_buffer(idx).ptr();
        if (!training) {
          for (std::size_t i = 0; i < rows * cols; ++i) {
            gx[i] += go[i] * gamma[i % cols] * inv_std[i % cols];
          }
          return;
        }
        // dx = inv_std / R * (R*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
        std::vector<S> sum_d(cols, S(0));
        std::vector<S> sum_dx(cols, S(0));
        for (std::size_t i = 0; i < rows * cols; ++i) {
          const S d = go[i] * gamma[i % cols];
          sum_d[i % cols] += d;
          sum_dx[i % cols] += d * xhat[i];
        }
        const S count = static_cast<S>(rows);
        for (std::size_t i = 0; i < rows * cols; ++i) {
          const std::size_t c = i % cols;
          const S d = go[i] * gamma[c];
          gx[i] += inv_std[c] / count * (count * d - sum_d[c] - xhat[i] * sum_dx[c]);
        }
      });
}

// ---------------------------------------------------------------------------
// Instantiations

#define STSP_INSTANTIATE_OPS(S)                                              \
  template class Graph<S>;                                                   \
  template Var<S> matmul(Var<S>, Var<S>);                                    \
  template Var<S> add(Var<S>, Var<S>);                                       \
  template Var<S> sub(Var<S>, Var<S>);                                       \
  template Var<S> mul(Var<S>, Var<S>);                                       \
  template Var<S> div(Var<S>, Var<S>);                                       \
  template Var<S> exp(Var<S>);                                               \
  template Var<S> log(Var<S>);                                               \
  template Var<S> tanh(Var<S>);                                              \
  template Var<S> relu(Var<S>);                                              \
  template Var<S> scale(Var<S>, double);                                     \
  template Var<S> softmax_rows(Var<S>);                                      \
  template Var<S> log_softmax_rows(Var<S>);                                  \
  template Var<S> logsumexp_rows(Var<S>);                                    \
  template Var<S> transpose(Var<S>);                                         \
  template Var<S> reshape(Var<S>, Shape);                                    \
  template Var<S> gather_rows(Var<S>, std::span<const std::uint32_t>);       \
  template Var<S> masked_fill(Var<S>, std::span<const std::uint8_t>, double); \
  template Var<S> reduce_sum(Var<S>);                                        \
  template Var<S> reduce_mean(Var<S>);                                       \
  template Var<S> slice_cols(Var<S>, std::size_t, std::size_t);              \
  template Var<S> concat_cols(std::span<const Var<S>>);                      \
  template Var<S> clamp_min(Var<S>, double, FloorCounter*);                  \
  template Var<S> batch_normalize(Var<S>, const BatchNormArgs<S>&);

STSP_INSTANTIATE_OPS(float)
STSP_INSTANTIATE_OPS(double)

#undef STSP_INSTANTIATE_OPS

}  // namespace stsp::ad
