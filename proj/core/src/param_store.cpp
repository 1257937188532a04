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

#include "stsp/param_store.hpp"

#include <cstring>

namespace stsp {

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename S>
ParamEntry<S>& ParamStore<S>::add(std::string name, Tensor<S> value,
                                  bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  ParamEntry<S> e;
  e.grad = Tensor<S>(value.shape);
  e.first_moment = Tensor<S>(value.shape);
  e.second_moment = Tensor<S>(value.shape);
  e.value = std::move(value);
  e.trainable = trainable;
  return entries_.emplace(std::move(name), std::move(e)).first->second;
}

template <typename S>
ParamEntry<S>& ParamStore<S>::at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("missing parameter: " + std::string(name));
  }
  return it->second;
}

template <typename S>
const ParamEntry<S>& ParamStore<S>::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("missing parameter: " + std::string(name));
  }
  return it->second;
}

template <typename S>
std::vector<std::string> ParamStore<S>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

template <typename S>
std::size_t ParamStore<S>::trainable_count() const {
  std::size_t total = 0;
  for (const auto& [_, e] : entries_) {
    if (e.trainable) total += e.value.size();
  }
  return total;
}

template <typename S>
void ParamStore<S>::zero_grad() {
  for (auto& [_, e] : entries_) {
    if (e.grad.shape != e.value.shape) e.grad = Tensor<S>(e.value.shape);
    std::fill(e.grad.data.begin(), e.grad.data.end(), S(0));
  }
}

template <typename S>
void ParamStore<S>::copy_values_from(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) {
    throw ConfigError("copy_values_from: stores have different entry counts");
  }
  for (auto& [name, e] : entries_) {
    const ParamEntry<S>& src = other.at(name);
    if (src.value.shape != e.value.shape) {
      throw ConfigError("copy_values_from: shape mismatch for " + name);
    }
    e.value = src.value;
  }
}

template <typename S>
std::uint64_t ParamStore<S>::fingerprint(bool trainable_only) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, e] : entries_) {
    if (trainable_only && !e.trainable) continue;
    mix(name.data(), name.size());
    mix(e.value.ptr(), e.value.size() * sizeof(S));
  }
  return h;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace stsp
