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

#include "stsp/tsp_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "stsp/error.hpp"

namespace stsp {
namespace {

using nlohmann::json;

template <typename F>
void for_each_line(std::istream& in, F&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), number);
    }
    try {
      fn(doc, number);
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(std::string("unexpected field type: ") + e.what(), number);
    } catch (const Error& e) {
      throw ParseError(e.what(), number);
    }
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string instance_to_json_line(const TspInstance& instance) {
  std::string s = "{\"n\":" + std::to_string(instance.size()) + ",\"coords\":[";
  for (std::size_t i = 0; i < instance.size(); ++i) {
    if (i > 0) s += ',';
    s += '[' + format_real(instance[i].x) + ',' + format_real(instance[i].y) + ']';
  }
  return s + "]}";
}

std::string tour_to_json_line(const Tour& tour) {
  std::string s = "{\"order\":[";
  for (std::size_t i = 0; i < tour.order.size(); ++i) {
    if (i > 0) s += ',';
    s += std::to_string(tour.order[i]);
  }
  return s + "],\"length\":" + format_real(tour.length) + "}";
}

void write_instances(std::ostream& out, std::span<const TspInstance> instances) {
  for (const TspInstance& inst : instances) out << instance_to_json_line(inst) << '\n';
}

std::vector<TspInstance> read_instances(std::istream& in) {
  std::vector<TspInstance> out;
  for_each_line(in, [&out](const json& doc, std::size_t line) {
    if (!doc.is_object() || !doc.contains("n") || !doc.contains("coords")) {
      throw ParseError("expected object with \"n\" and \"coords\"", line);
    }
    const auto n = doc.at("n").get<std::int64_t>();
    const json& coords = doc.at("coords");
    if (!coords.is_array()) throw ParseError("\"coords\" must be an array", line);
    if (n < 0 || static_cast<std::size_t>(n) != coords.size()) {
      throw ParseError("\"n\" = " + std::to_string(n) + " but " +
                           std::to_string(coords.size()) + " coordinates given",
                       line);
    }
    std::vector<City> cities;
    cities.reserve(coords.size());
    for (const json& c : coords) {
      if (!c.is_array() || c.size() != 2) {
        throw ParseError("each coordinate must be [x, y]", line);
      }
      cities.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    out.push_back(TspInstance::from_canonical(std::move(cities)));
  });
  return out;
}

void write_tours(std::ostream& out, std::span<const Tour> tours) {
  for (const Tour& t : tours) out << tour_to_json_line(t) << '\n';
}

std::vector<Tour> read_tours(std::istream& in) {
  std::vector<Tour> out;
  for_each_line(in, [&out](const json& doc, std::size_t line) {
    if (!doc.is_object() || !doc.contains("order") || !doc.contains("length")) {
      throw ParseError("expected object with \"order\" and \"length\"", line);
    }
    Tour t;
    t.order = doc.at("order").get<std::vector<int>>();
    t.length = doc.at("length").get<double>();
    validate_permutation(t.order, t.order.size());
    out.push_back(std::move(t));
  });
  return out;
}

void write_instances(const std::filesystem::path& path,
                     std::span<const TspInstance> instances) {
  std::ofstream out = open_for_write(path);
  write_instances(out, instances);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TspInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  return read_instances(in);
}

void write_tours(const std::filesystem::path& path, std::span<const Tour> tours) {
  std::ofstream out = open_for_write(path);
  write_tours(out, tours);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Tour> read_tours(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  return read_tours(in);
}

}  // namespace stsp
