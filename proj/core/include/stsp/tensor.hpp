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

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "stsp/error.hpp"

namespace stsp {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major array. Rank is 1 to 3 in practice; the last axis is the
/// "row" axis for row-wise ops.
template <typename S>
struct Tensor {
  using Scalar = S;

  Shape shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(Shape s, S fill = S(0))
      : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<S> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (numel(shape) != data.size()) {
      throw ConfigError("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_string(shape));
    }
  }

  static Tensor scalar(S value) { return Tensor({1}, std::vector<S>{value}); }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  /// Length of the last axis.
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return size() / cols(); }

  S* ptr() noexcept { return data.data(); }
  const S* ptr() const noexcept { return data.data(); }
  S& operator[](std::size_t i) { return data[i]; }
  const S& operator[](std::size_t i) const { return data[i]; }
  S& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const S& at(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
  }

  S item() const {
    if (size() != 1) {
      throw ConfigError("item() on tensor of shape " + shape_string(shape));
    }
    return data[0];
  }

  template <typename T>
  Tensor<T> cast() const {
    return Tensor<T>(shape, std::vector<T>(data.begin(), data.end()));
  }

  bool operator==(const Tensor&) const = default;
};

}  // namespace stsp
