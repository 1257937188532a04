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

// Binary checkpoint layout (all integers little-endian):
//
//   "STSP"                      4-byte magic
//   u32 format version
//   u32 metadata length, then that many bytes of UTF-8 JSON
//   per tensor, in metadata "tensors" order:
//     u16 name length, name bytes
//     u8 rank, rank x u32 dims
//     raw IEEE-754 little-endian values (f32 or f64, per metadata "dtype")
//
// Metadata is dumped with sorted keys, so save -> load -> save reproduces
// the file byte for byte.

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stsp/param_store.hpp"

namespace stsp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  /// Values widened to double; f32 checkpoints narrow back exactly.
  std::vector<std::pair<std::string, Tensor<double>>> tensors;

  std::string dtype() const;
};

template <typename S>
constexpr const char* dtype_name();
template <>
constexpr const char* dtype_name<float>() { return "f32"; }
template <>
constexpr const char* dtype_name<double>() { return "f64"; }

/// Every entry of the store (buffers included), with `metadata` extended by
/// format_version, dtype and the tensor name list.
template <typename S>
Checkpoint make_checkpoint(const ParamStore<S>& store, nlohmann::json metadata);

/// Copies tensor values into an existing store. Names and shapes must match
/// exactly; otherwise CheckpointMismatchError lists the differences.
template <typename S>
void apply_checkpoint(const Checkpoint& ckpt, ParamStore<S>& store);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stsp
