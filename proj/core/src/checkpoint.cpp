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

#include "stsp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "stsp/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace stsp {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'S', 'P'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t count, const char* what) {
    need(count, what);
    std::string_view s = bytes_.substr(pos_, count);
    pos_ += count;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count) {
      throw CheckpointTruncatedError(std::string("checkpoint truncated while reading ") +
                                     what + " at byte " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Checkpoint::dtype() const {
  auto it = metadata.find("dtype");
  if (it == metadata.end() || !it->is_string()) return "f64";
  return it->get<std::string>();
}

template <typename S>
Checkpoint make_checkpoint(const ParamStore<S>& store, nlohmann::json metadata) {
  Checkpoint ckpt;
  nlohmann::json names = nlohmann::json::array();
  for (const auto& [name, entry] : store.entries()) {
    names.push_back(name);
    ckpt.tensors.emplace_back(name, entry.value.template cast<double>());
  }
  metadata["format_version"] = kCheckpointVersion;
  metadata["dtype"] = dtype_name<S>();
  metadata["tensors"] = std::move(names);
  metadata["optimizer_step"] = store.optimizer_step;
  ckpt.metadata = std::move(metadata);
  return ckpt;
}

template <typename S>
void apply_checkpoint(const Checkpoint& ckpt, ParamStore<S>& store) {
  std::set<std::string, std::less<>> have;
  std::string problems;
  for (const auto& [name, tensor] : ckpt.tensors) {
    have.insert(name);
    if (!store.contains(name)) {
      problems += " unexpected '" + name + "'";
    } else if (store.at(name).value.shape != tensor.shape) {
      problems += " shape of '" + name + "' is " + shape_string(tensor.shape) +
                  ", model expects " + shape_string(store.at(name).value.shape);
    }
  }
  for (const std::string& name : store.names()) {
    if (!have.contains(name)) problems += " missing '" + name + "'";
  }
  if (!problems.empty()) {
    throw CheckpointMismatchError("checkpoint does not match model:" + problems);
  }
  for (const auto& [name, tensor] : ckpt.tensors) {
    store.at(name).value = tensor.template cast<S>();
  }
  if (auto it = ckpt.metadata.find("optimizer_step"); it != ckpt.metadata.end()) {
    store.optimizer_step = it->get<std::uint64_t>();
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const std::string dtype = ckpt.dtype();
  if (dtype != "f32" && dtype != "f64") {
    throw CheckpointError("unsupported checkpoint dtype '" + dtype + "'");
  }
  const std::string meta = ckpt.metadata.dump();
  if (meta.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw CheckpointError("checkpoint metadata too large");
  }
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CheckpointError("tensor name too long: " + name.substr(0, 32));
    }
    if (tensor.rank() > std::numeric_limits<std::uint8_t>::max()) {
      throw CheckpointError("tensor rank too large: " + name);
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape) {
      if (d > std::numeric_limits<std::uint32_t>::max()) {
        throw CheckpointError("tensor dimension too large: " + name);
      }
      put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    if (dtype == "f32") {
      for (double v : tensor.data) put<float>(out, static_cast<float>(v));
    } else {
      for (double v : tensor.data) put<double>(out, v);
    }
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  std::string_view magic = in.take(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not an stsp checkpoint (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("format version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto meta_len = in.get<std::uint32_t>("metadata length");
  std::string_view meta = in.take(meta_len, "metadata");

  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (!ckpt.metadata.is_object() || !ckpt.metadata.contains("tensors") ||
      !ckpt.metadata["tensors"].is_array()) {
    throw CheckpointError("checkpoint metadata lacks a tensor list");
  }
  const std::string dtype = ckpt.dtype();
  if (dtype != "f32" && dtype != "f64") {
    throw CheckpointError("unsupported checkpoint dtype '" + dtype + "'");
  }
  const std::size_t width = dtype == "f32" ? 4 : 8;

  for (const auto& expected : ckpt.metadata["tensors"]) {
    const auto name_len = in.get<std::uint16_t>("tensor name length");
    std::string name(in.take(name_len, "tensor name"));
    if (name != expected.get<std::string>()) {
      throw CheckpointMismatchError("checkpoint tensor '" + name +
                                    "' where metadata lists '" +
                                    expected.get<std::string>() + "'");
    }
    const auto rank = in.get<std::uint8_t>("tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint32_t>("tensor dims");
    const std::size_t count = numel(shape);
    if (count > in.remaining() / width) {
      throw CheckpointTruncatedError("checkpoint truncated inside tensor '" + name + "'");
    }
    Tensor<double> t(shape);
    std::string_view raw = in.take(count * width, "tensor values");
    for (std::size_t i = 0; i < count; ++i) {
      if (width == 4) {
        float f;
        std::memcpy(&f, raw.data() + i * 4, 4);
        t[i] = f;
      } else {
        std::memcpy(&t[i], raw.data() + i * 8, 8);
      }
    }
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!in.done()) {
    throw CheckpointError("checkpoint has " + std::to_string(in.remaining()) +
                          " trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

template Checkpoint make_checkpoint(const ParamStore<float>&, nlohmann::json);
template Checkpoint make_checkpoint(const ParamStore<double>&, nlohmann::json);
template void apply_checkpoint(const Checkpoint&, ParamStore<float>&);
template void apply_checkpoint(const Checkpoint&, ParamStore<double>&);

}  // namespace stsp
