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

#pragma once

// Flat key-value configuration text:
//
//   version = 1
//   # comment
//   epochs = 50
//   image_mask.ratio = 0.75
//
// The first key must be `version`. Keys mirror the TrainConfig and
// SceneConfig field names; unknown keys are rejected.

#include <map>
#include <string>
#include <string_view>

#include "maskris/synthdata.hpp"
#include "maskris/trainer.hpp"

namespace maskris::config {

inline constexpr int kConfigVersion = 1;

using KeyValues = std::map<std::string, std::string>;

// Throws FormatError on malformed lines, duplicate keys or a missing or
// unsupported version.
KeyValues parse(std::string_view text);
std::string format(const KeyValues& kv);

train::TrainConfig train_config_from(const KeyValues& kv);
KeyValues to_key_values(const train::TrainConfig& cfg);

synth::SceneConfig scene_config_from(const KeyValues& kv);
KeyValues to_key_values(const synth::SceneConfig& cfg);

train::TrainConfig load_train_config(const std::string& path);
synth::SceneConfig load_scene_config(const std::string& path);

// Round-trip formatting of a double ("%.17g").
std::string format_double(double v);

}  // namespace maskris::config
