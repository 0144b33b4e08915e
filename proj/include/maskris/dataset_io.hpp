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

// Dataset container, version 1. All integers little-endian.
//
//   "MRISDSET"                 8-byte magic
//   u32 version                1
//   u64 seed
//   u32 count
//   u32 image_height, image_width, patch_size, max_tokens
//   u32 min_shapes, max_shapes, min_shape_size, max_shape_size, max_retries
//   f64 occluder_prob, p_position_template, p_ordinal_template
//   u32 vocab_size, then vocab_size x (u16 length, UTF-8 bytes)
//   count x record:
//     u32 record_bytes         size of the fields below
//     u8  split                0 train, 1 val
//     u8  tags                 bit 0 occlusion, 1 relative position, 2 ordering
//     u16 valid_len
//     u16 expression length, expression bytes
//     max_tokens x u16         token IDs
//     H*W*3 x f32              image, row-major, interleaved RGB
//     ceil(H*W/8) bytes        ground-truth mask, row-major, LSB first
//   u64 FNV-1a checksum of every preceding byte

#include <cstdint>
#include <string>
#include <vector>

#include "maskris/synthdata.hpp"

namespace maskris::io {

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const synth::Dataset& ds);
// Throws FormatError on a bad magic, version, checksum or truncated input.
synth::Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);

void write_dataset(const std::string& path, const synth::Dataset& ds);
synth::Dataset read_dataset(const std::string& path);

}  // namespace maskris::io
