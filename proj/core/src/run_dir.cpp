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

#include "stsp/run_dir.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "stsp/error.hpp"

namespace fs = std::filesystem;

namespace stsp {

fs::path RunDir::root() {
  const char* env = std::getenv("STSP_RUN_ROOT");
  if (env != nullptr && *env != '\0') return fs::path(env);
  return fs::path("runs");
}

RunDir RunDir::create(const fs::path& where) {
  const fs::path p = where.is_absolute() ? where : root() / where;
  std::error_code ec;
  if (fs::exists(p, ec)) {
    if (!fs::is_directory(p, ec)) throw IoError("run path is not a directory: " + p.string());
    if (!fs::is_empty(p, ec)) {
      throw IoError("run directory already exists and is not empty: " + p.string());
    }
  }
  fs::create_directories(p / "checkpoints", ec);
  if (ec) throw IoError("cannot create run directory " + p.string() + ": " + ec.message());
  return RunDir(p);
}

RunDir RunDir::open(const fs::path& where) {
  fs::path p = where;
  if (!fs::exists(p) && !where.is_absolute() && fs::exists(root() / where)) p = root() / where;
  if (!fs::exists(p / "config.toml")) {
    throw IoError("not a run directory (no config.toml): " + p.string());
  }
  return RunDir(p);
}

fs::path RunDir::checkpoint_path(std::size_t epoch) const {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%04zu.stsp", epoch);
  return checkpoint_dir() / name;
}

std::vector<fs::path> RunDir::checkpoints() const {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(checkpoint_dir(), ec)) {
    if (e.path().extension() == ".stsp") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path unused_path(const fs::path& wanted) {
  if (!fs::exists(wanted)) return wanted;
  const fs::path dir = wanted.parent_path();
  const std::string stem = wanted.stem().string();
  const std::string ext = wanted.extension().string();
  for (int k = 1;; ++k) {
    fs::path candidate = dir / (stem + "-" + std::to_string(k) + ext);
    if (!fs::exists(candidate)) return candidate;
  }
}

void write_new_file(const fs::path& path, const std::string& contents) {
  if (fs::exists(path)) throw IoError("refusing to overwrite " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace stsp
