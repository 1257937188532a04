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

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stsp/tensor.hpp"

namespace stsp {

/// One named parameter. Buffers (normalization running statistics) are
/// stored here too with `trainable == false`: they are checkpointed but never
/// see gradients or optimizer updates.
template <typename S>
struct ParamEntry {
  Tensor<S> value;
  Tensor<S> grad;
  Tensor<S> first_moment;
  Tensor<S> second_moment;
  bool trainable = true;
};

template <typename S>
class ParamStore {
 public:
  using Entries = std::map<std::string, ParamEntry<S>, std::less<>>;

  ParamEntry<S>& add(std::string name, Tensor<S> value, bool trainable = true);

  bool contains(std::string_view name) const {
    return entries_.find(name) != entries_.end();
  }
  ParamEntry<S>& at(std::string_view name);
  const ParamEntry<S>& at(std::string_view name) const;

  /// Names in lexicographic order.
  std::vector<std::string> names() const;
  const Entries& entries() const noexcept { return entries_; }
  Entries& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Total scalar count of trainable entries.
  std::size_t trainable_count() const;

  void zero_grad();

  /// Copies values (not gradients or moments) from a store with identical
  /// names and shapes.
  void copy_values_from(const ParamStore& other);

  /// FNV-1a over names and value bytes; used for freeze/mutation checks.
  /// With trainable_only, buffers are skipped.
  std::uint64_t fingerprint(bool trainable_only = false) const;

  std::uint64_t optimizer_step = 0;

 private:
  Entries entries_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace stsp
