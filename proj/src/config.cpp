// Copyright (c) the maskris-lab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "maskris/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "binio.hpp"
#include "maskris/errors.hpp"

namespace maskris::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw FormatError("config key '" + key + "': not a number: '" + v + "'");
  }
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw FormatError("config key '" + key + "': not an integer: '" + v + "'");
  }
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  if (!v.empty() && v[0] == '-') throw FormatError("config key '" + key + "': negative seed");
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw FormatError("config key '" + key + "': not an unsigned integer: '" + v + "'");
  }
  return u;
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

void apply_settings(const KeyValues& kv, const std::map<std::string, Setter>& setters) {
  for (const auto& [k, v] : kv) {
    if (k == "version") continue;
    const auto it = setters.find(k);
    if (it == setters.end()) throw FormatError("unknown config key '" + k + "'");
    it->second(k, v);
  }
}

Setter int_field(int& f) {
  return [&f](const std::string& k, const std::string& v) { f = static_cast<int>(to_int(k, v)); };
}
Setter dbl_field(double& f) {
  return [&f](const std::string& k, const std::string& v) { f = to_double(k, v); };
}
Setter bool_field(bool& f) {
  return [&f](const std::string& k, const std::string& v) { f = to_bool(k, v); };
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

KeyValues parse(std::string_view text) {
  KeyValues kv;
  bool first = true;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    if (first && key != "version") throw FormatError("config must start with a version key");
    first = false;
    if (!kv.emplace(key, value).second) throw FormatError("duplicate config key '" + key + "'");
  }
  if (first) throw FormatError("config is empty; expected a version key");
  if (kv.at("version") != std::to_string(kConfigVersion)) {
    throw FormatError("unsupported config version '" + kv.at("version") + "'");
  }
  return kv;
}

std::string format(const KeyValues& kv) {
  std::string out = "version = " + std::to_string(kConfigVersion) + "\n";
  for (const auto& [k, v] : kv) {
    if (k == "version") continue;
    out += k + " = " + v + "\n";
  }
  return out;
}

train::TrainConfig train_config_from(const KeyValues& kv) {
  train::TrainConfig c;
  std::map<std::string, Setter> s = {
      {"epochs", int_field(c.epochs)},
      {"batch_size", int_field(c.batch_size)},
      {"lr_base", dbl_field(c.lr_base)},
      {"weight_decay", dbl_field(c.weight_decay)},
      {"poly_power", dbl_field(c.poly_power)},
      {"encoder_lr_mult", dbl_field(c.encoder_lr_mult)},
      {"image_mask.strategy",
       [&c](const std::string&, const std::string& v) {
         c.image_mask.strategy = masking::parse_strategy(v);
       }},
      {"image_mask.ratio", dbl_field(c.image_mask.ratio)},
      {"image_mask.patch", int_field(c.image_mask.patch)},
      {"text_mask.select_ratio", dbl_field(c.text_mask.select_ratio)},
      {"text_mask.p_mask", dbl_field(c.text_mask.p_mask)},
      {"text_mask.p_random", dbl_field(c.text_mask.p_random)},
      {"text_mask.p_unchanged", dbl_field(c.text_mask.p_unchanged)},
      {"loss.lambda", dbl_field(c.loss.lambda)},
      {"loss.full_bce", bool_field(c.loss.full_bce)},
      {"seed", [&c](const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"dcl_enabled", bool_field(c.dcl_enabled)},
      {"aug_only_mode", bool_field(c.aug_only_mode)},
      {"aug_prob", dbl_field(c.aug_prob)},
      {"embed_dim", int_field(c.embed_dim)},
      {"fusion_layers", int_field(c.fusion_layers)},
      {"patch_size", int_field(c.patch_size)},
      {"checkpoint_every", int_field(c.checkpoint_every)},
  };
  try {
    apply_settings(kv, s);
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

KeyValues to_key_values(const train::TrainConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"version", std::to_string(kConfigVersion)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"lr_base", format_double(c.lr_base)},
      {"weight_decay", format_double(c.weight_decay)},
      {"poly_power", format_double(c.poly_power)},
      {"encoder_lr_mult", format_double(c.encoder_lr_mult)},
      {"image_mask.strategy", std::string(masking::strategy_name(c.image_mask.strategy))},
      {"image_mask.ratio", format_double(c.image_mask.ratio)},
      {"image_mask.patch", std::to_string(c.image_mask.patch)},
      {"text_mask.select_ratio", format_double(c.text_mask.select_ratio)},
      {"text_mask.p_mask", format_double(c.text_mask.p_mask)},
      {"text_mask.p_random", format_double(c.text_mask.p_random)},
      {"text_mask.p_unchanged", format_double(c.text_mask.p_unchanged)},
      {"loss.lambda", format_double(c.loss.lambda)},
      {"loss.full_bce", b(c.loss.full_bce)},
      {"seed", std::to_string(c.seed)},
      {"dcl_enabled", b(c.dcl_enabled)},
      {"aug_only_mode", b(c.aug_only_mode)},
      {"aug_prob", format_double(c.aug_prob)},
      {"embed_dim", std::to_string(c.embed_dim)},
      {"fusion_layers", std::to_string(c.fusion_layers)},
      {"patch_size", std::to_string(c.patch_size)},
      {"checkpoint_every", std::to_string(c.checkpoint_every)},
  };
}

synth::SceneConfig scene_config_from(const KeyValues& kv) {
  synth::SceneConfig c;
  std::map<std::string, Setter> s = {
      {"image_height", int_field(c.image_height)},
      {"image_width", int_field(c.image_width)},
      {"patch_size", int_field(c.patch_size)},
      {"min_shapes", int_field(c.min_shapes)},
      {"max_shapes", int_field(c.max_shapes)},
      {"min_shape_size", int_field(c.min_shape_size)},
      {"max_shape_size", int_field(c.max_shape_size)},
      {"occluder_prob", dbl_field(c.occluder_prob)},
      {"p_position_template", dbl_field(c.p_position_template)},
      {"p_ordinal_template", dbl_field(c.p_ordinal_template)},
      {"max_tokens", int_field(c.max_tokens)},
      {"max_retries", int_field(c.max_retries)},
  };
  try {
    apply_settings(kv, s);
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

KeyValues to_key_values(const synth::SceneConfig& c) {
  return {
      {"version", std::to_string(kConfigVersion)},
      {"image_height", std::to_string(c.image_height)},
      {"image_width", std::to_string(c.image_width)},
      {"patch_size", std::to_string(c.patch_size)},
      {"min_shapes", std::to_string(c.min_shapes)},
      {"max_shapes", std::to_string(c.max_shapes)},
      {"min_shape_size", std::to_string(c.min_shape_size)},
      {"max_shape_size", std::to_string(c.max_shape_size)},
      {"occluder_prob", format_double(c.occluder_prob)},
      {"p_position_template", format_double(c.p_position_template)},
      {"p_ordinal_template", format_double(c.p_ordinal_template)},
      {"max_tokens", std::to_string(c.max_tokens)},
      {"max_retries", std::to_string(c.max_retries)},
  };
}

namespace {
std::string read_text(const std::string& path) {
  const std::vector<std::uint8_t> bytes = binio::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}
}  // namespace

train::TrainConfig load_train_config(const std::string& path) {
  return train_config_from(parse(read_text(path)));
}

synth::SceneConfig load_scene_config(const std::string& path) {
  return scene_config_from(parse(read_text(path)));
}

}  // namespace maskris::config
