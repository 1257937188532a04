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

#include <filesystem>
#include <string>
#include <vector>

namespace stsp {

/// Layout of one training run:
///
///   config.toml           resolved configuration, written first
///   metrics.jsonl         one deterministic record per epoch
///   timing.jsonl          wall-clock per epoch
///   checkpoints/epoch_NNNN.stsp
///   reports/              benchmark output
class RunDir {
 public:
  /// $STSP_RUN_ROOT if set and non-empty, else "runs".
  static std::filesystem::path root();

  /// Creates a fresh run directory. Relative paths resolve under root().
  /// An existing non-empty directory is refused.
  static RunDir create(const std::filesystem::path& where);

  /// Opens an existing run directory (must contain config.toml).
  static RunDir open(const std::filesystem::path& where);

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path config_path() const { return path_ / "config.toml"; }
  std::filesystem::path metrics_path() const { return path_ / "metrics.jsonl"; }
  std::filesystem::path timing_path() const { return path_ / "timing.jsonl"; }
  std::filesystem::path checkpoint_dir() const { return path_ / "checkpoints"; }
  std::filesystem::path reports_dir() const { return path_ / "reports"; }
  std::filesystem::path checkpoint_path(std::size_t epoch) const;

  /// Checkpoint files sorted by epoch.
  std::vector<std::filesystem::path> checkpoints() const;

 private:
  explicit RunDir(std::filesystem::path p) : path_(std::move(p)) {}
  std::filesystem::path path_;
};

/// `wanted` if it does not exist, else the first free `stem-K.ext`, K >= 1.
std::filesystem::path unused_path(const std::filesystem::path& wanted);

/// Writes a whole file, refusing to replace an existing one.
void write_new_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace stsp
