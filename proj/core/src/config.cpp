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

#include "stsp/config.hpp"

#include <toml.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "stsp/error.hpp"

namespace stsp {
namespace {

using Value = std::variant<std::uint64_t, double, bool, std::string>;

enum class Kind { count, real, flag, choice };

struct KeySpec {
  const char* key;
  Kind kind;
  std::vector<std::string> choices;
  std::function<Value(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const Value&)> set;
};

template <typename T>
KeySpec count_key(const char* key, T TrainConfig::*field) {
  return {key, Kind::count, {},
          [field](const TrainConfig& c) { return Value(static_cast<std::uint64_t>(c.*field)); },
          [field](TrainConfig& c, const Value& v) {
            c.*field = static_cast<T>(std::get<std::uint64_t>(v));
          }};
}

// Accessor-based variants for nested members.
KeySpec count_fn(const char* key, std::function<std::size_t&(TrainConfig&)> ref) {
  return {key, Kind::count, {},
          [ref](const TrainConfig& c) {
            return Value(static_cast<std::uint64_t>(ref(const_cast<TrainConfig&>(c))));
          },
          [ref](TrainConfig& c, const Value& v) {
            ref(c) = static_cast<std::size_t>(std::get<std::uint64_t>(v));
          }};
}

KeySpec real_fn(const char* key, std::function<double&(TrainConfig&)> ref) {
  return {key, Kind::real, {},
          [ref](const TrainConfig& c) { return Value(ref(const_cast<TrainConfig&>(c))); },
          [ref](TrainConfig& c, const Value& v) { ref(c) = std::get<double>(v); }};
}

KeySpec flag_fn(const char* key, std::function<bool&(TrainConfig&)> ref) {
  return {key, Kind::flag, {},
          [ref](const TrainConfig& c) { return Value(ref(const_cast<TrainConfig&>(c))); },
          [ref](TrainConfig& c, const Value& v) { ref(c) = std::get<bool>(v); }};
}

template <typename E>
KeySpec choice_fn(const char* key, std::vector<std::pair<std::string, E>> names,
                  std::function<E&(TrainConfig&)> ref) {
  std::vector<std::string> choices;
  for (const auto& [name, _] : names) choices.push_back(name);
  return {key, Kind::choice, choices,
          [ref, names](const TrainConfig& c) {
            const E e = ref(const_cast<TrainConfig&>(c));
            for (const auto& [name, value] : names) {
              if (value == e) return Value(name);
            }
            return Value(std::string("?"));
          },
          [ref, names](TrainConfig& c, const Value& v) {
            for (const auto& [name, value] : names) {
              if (name == std::get<std::string>(v)) {
                ref(c) = value;
                return;
              }
            }
          }};
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> s;
    s.push_back(count_key("seed", &TrainConfig::seed));
    s.push_back(count_key("n", &TrainConfig::n));
    s.push_back(count_key("train.epochs", &TrainConfig::epochs));
    s.push_back(count_key("train.batches_per_epoch", &TrainConfig::batches_per_epoch));
    s.push_back(count_key("train.batch_size", &TrainConfig::batch_size));
    s.push_back(real_fn("train.learning_rate",
                        [](TrainConfig& c) -> double& { return c.learning_rate; }));
    s.push_back(real_fn("train.grad_clip_norm",
                        [](TrainConfig& c) -> double& { return c.grad_clip_norm; }));
    s.push_back(count_key("train.baseline_val_size", &TrainConfig::baseline_val_size));
    s.push_back(real_fn("train.baseline_threshold",
                        [](TrainConfig& c) -> double& { return c.baseline_threshold; }));
    s.push_back(choice_fn<Precision>(
        "train.precision", {{"f32", Precision::f32}, {"f64", Precision::f64}},
        [](TrainConfig& c) -> Precision& { return c.precision; }));
    s.push_back(flag_fn("train.debug_checks",
                        [](TrainConfig& c) -> bool& { return c.debug_checks; }));
    s.push_back(count_fn("encoder.d",
                         [](TrainConfig& c) -> std::size_t& { return c.policy.encoder.d; }));
    s.push_back(count_fn("encoder.layers", [](TrainConfig& c) -> std::size_t& {
      return c.policy.encoder.layers;
    }));
    s.push_back(count_fn("encoder.heads", [](TrainConfig& c) -> std::size_t& {
      return c.policy.encoder.heads;
    }));
    s.push_back(real_fn("encoder.tanh_scale", [](TrainConfig& c) -> double& {
      return c.policy.encoder.tanh_scale;
    }));
    s.push_back(choice_fn<Normalization>(
        "encoder.normalization",
        {{"batch", Normalization::batch}, {"none", Normalization::none}},
        [](TrainConfig& c) -> Normalization& { return c.policy.encoder.normalization; }));
    s.push_back(flag_fn("encoder.feed_forward", [](TrainConfig& c) -> bool& {
      return c.policy.encoder.feed_forward;
    }));
    s.push_back(choice_fn<DecoderKind>(
        "decoder.kind",
        {{"softmax", DecoderKind::softmax}, {"sinkhorn", DecoderKind::sinkhorn}},
        [](TrainConfig& c) -> DecoderKind& { return c.policy.decoder; }));
    s.push_back(real_fn("decoder.lambda",
                        [](TrainConfig& c) -> double& { return c.policy.sinkhorn.lambda; }));
    s.push_back(count_fn("decoder.iterations", [](TrainConfig& c) -> std::size_t& {
      return c.policy.sinkhorn.iterations;
    }));
    s.push_back(real_fn("decoder.epsilon",
                        [](TrainConfig& c) -> double& { return c.policy.sinkhorn.epsilon; }));
    s.push_back(flag_fn("decoder.log_domain", [](TrainConfig& c) -> bool& {
      return c.policy.sinkhorn.log_domain;
    }));
    s.push_back(flag_fn("decoder.mask_before_sinkhorn", [](TrainConfig& c) -> bool& {
      return c.policy.mask_before_sinkhorn;
    }));
    return s;
  }();
  return specs;
}

const KeySpec& find_key(const std::string& key) {
  for (const KeySpec& s : key_specs()) {
    if (key == s.key) return s;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string kind_name(const KeySpec& s) {
  switch (s.kind) {
    case Kind::count: return "a non-negative integer";
    case Kind::real: return "a number";
    case Kind::flag: return "true or false";
    case Kind::choice: {
      std::string out = "one of";
      for (const std::string& c : s.choices) out += " " + c;
      return out;
    }
  }
  return "?";
}

[[noreturn]] void bad_value(const KeySpec& s, const std::string& got) {
  throw ConfigError(std::string(s.key) + ": expected " + kind_name(s) + ", got '" + got + "'");
}

void check_choice(const KeySpec& s, const std::string& v) {
  for (const std::string& c : s.choices) {
    if (c == v) return;
  }
  bad_value(s, v);
}

Value parse_text(const KeySpec& s, const std::string& text) {
  switch (s.kind) {
    case Kind::count: {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(s, text);
      return v;
    }
    case Kind::real: {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(s, text);
      return v;
    }
    case Kind::flag:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      bad_value(s, text);
    case Kind::choice: {
      std::string v = text;
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
      check_choice(s, v);
      return v;
    }
  }
  bad_value(s, text);
}

Value from_toml(const KeySpec& s, const toml::node& node) {
  std::ostringstream shown;
  node.visit([&shown](const auto& v) { shown << v; });
  switch (s.kind) {
    case Kind::count:
      if (auto v = node.value_exact<std::int64_t>(); v && *v >= 0) {
        return static_cast<std::uint64_t>(*v);
      }
      break;
    case Kind::real:
      if (node.is_floating_point()) return *node.value<double>();
      if (auto v = node.value_exact<std::int64_t>()) return static_cast<double>(*v);
      break;
    case Kind::flag:
      if (auto v = node.value_exact<bool>()) return *v;
      break;
    case Kind::choice:
      if (auto v = node.value_exact<std::string>()) {
        check_choice(s, *v);
        return *v;
      }
      break;
  }
  bad_value(s, shown.str());
}

Value from_json_value(const KeySpec& s, const nlohmann::json& j) {
  switch (s.kind) {
    case Kind::count:
      if (j.is_number_unsigned()) return j.get<std::uint64_t>();
      if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
      }
      break;
    case Kind::real:
      if (j.is_number()) return j.get<double>();
      break;
    case Kind::flag:
      if (j.is_boolean()) return j.get<bool>();
      break;
    case Kind::choice:
      if (j.is_string()) {
        check_choice(s, j.get<std::string>());
        return j.get<std::string>();
      }
      break;
  }
  bad_value(s, j.dump());
}

void walk_toml(const toml::table& table, const std::string& prefix, TrainConfig& config) {
  for (const auto& [k, node] : table) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const toml::table* sub = node.as_table()) {
      walk_toml(*sub, key, config);
      continue;
    }
    const KeySpec& s = find_key(key);
    s.set(config, from_toml(s, node));
  }
}

void walk_json(const nlohmann::json& j, const std::string& prefix, TrainConfig& config) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      walk_json(v, key, config);
      continue;
    }
    const KeySpec& s = find_key(key);
    s.set(config, from_json_value(s, v));
  }
}

// Shortest text that reads back to the same double.
std::string toml_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ec == std::errc() ? end : buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string render(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::uint64_t>) return std::to_string(x);
        if constexpr (std::is_same_v<T, double>) return toml_real(x);
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        if constexpr (std::is_same_v<T, std::string>) return "\"" + x + "\"";
      },
      v);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const KeySpec& s : key_specs()) keys.emplace_back(s.key);
  return keys;
}

bool is_config_key(const std::string& key) {
  for (const KeySpec& s : key_specs()) {
    if (key == s.key) return true;
  }
  return false;
}

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
  const KeySpec& s = find_key(key);
  s.set(config, parse_text(s, value));
}

TrainConfig parse_config_toml(const std::string& text, const std::string& source) {
  toml::table table;
  try {
    table = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.source().begin.line) + ": " +
                      std::string(e.description()));
  }
  TrainConfig config;
  walk_toml(table, "", config);
  return config;
}

TrainConfig load_config(const std::optional<std::filesystem::path>& file,
                        const std::vector<ConfigOverride>& overrides) {
  TrainConfig config;
  if (file) {
    if (!std::filesystem::exists(*file)) {
      throw IoError("config file not found: " + file->string());
    }
    std::ifstream in(*file);
    if (!in) throw IoError("cannot read config file " + file->string());
    std::ostringstream buf;
    buf << in.rdbuf();
    config = parse_config_toml(buf.str(), file->string());
  }
  for (const auto& [key, value] : overrides) apply_override(config, key, value);
  config.validate();
  return config;
}

std::string config_to_toml(const TrainConfig& config) {
  std::string out;
  std::string section;
  for (const KeySpec& s : key_specs()) {
    const std::string key = s.key;
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += leaf + " = " + render(s.get(config)) + "\n";
  }
  return out;
}

nlohmann::json config_to_json(const TrainConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const KeySpec& s : key_specs()) {
    const std::string key = s.key;
    const auto dot = key.find('.');
    nlohmann::json& slot =
        dot == std::string::npos ? j[key] : j[key.substr(0, dot)][key.substr(dot + 1)];
    std::visit([&slot](const auto& x) { slot = x; }, s.get(config));
  }
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  TrainConfig config;
  walk_json(j, "", config);
  return config;
}

}  // namespace stsp
