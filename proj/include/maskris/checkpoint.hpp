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

// Checkpoint file, version 1. All integers little-endian.
//
//   "MRISCKPT"        8-byte magic
//   u32 version       1
//   u32 embed_dim, fusion_layers, patch_size, vocab_size, image_height, image_width
//   u64 step
//   u64 n             parameter count
//   n x f64           parameters, in ParamLayout order
//   n x f64           first moments
//   n x f64           second moments
//   u64 FNV-1a checksum of every preceding byte

#include <cstdint>
#include <string>
#include <vector>

#include "maskris/model.hpp"

namespace maskris::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const model::ModelState& state);
// Throws FormatError on any inconsistency.
model::ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const model::ModelState& state);
model::ModelState load_checkpoint(const std::string& path);

}  // namespace maskris::io
