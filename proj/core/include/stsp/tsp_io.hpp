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

// Line-delimited JSON persistence.
//
//   .tspjl   {"n":<int>,"coords":[[x,y],...]}   coords in canonical order
//   .tourjl  {"order":[int,...],"length":<float>}
//
// Reals are written with 17 significant digits, so a write/read round trip
// reproduces every double exactly. UTF-8, LF line endings; blank lines are
// ignored on read.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stsp/tsp.hpp"

namespace stsp {

std::string format_real(double value);
std::string instance_to_json_line(const TspInstance& instance);
std::string tour_to_json_line(const Tour& tour);

void write_instances(std::ostream& out, std::span<const TspInstance> instances);
std::vector<TspInstance> read_instances(std::istream& in);
void write_tours(std::ostream& out, std::span<const Tour> tours);
std::vector<Tour> read_tours(std::istream& in);

void write_instances(const std::filesystem::path& path,
                     std::span<const TspInstance> instances);
std::vector<TspInstance> read_instances(const std::filesystem::path& path);
void write_tours(const std::filesystem::path& path, std::span<const Tour> tours);
std::vector<Tour> read_tours(const std::filesystem::path& path);

}  // namespace stsp
