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

// Binary PGM (P5) previews. A "# version=1" comment follows the magic so the
// files carry the same version key as every other artifact.

#include <cstdint>
#include <string>
#include <vector>

#include "maskris/types.hpp"

namespace maskris::io {

inline constexpr int kPgmVersion = 1;

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

// Rec. 601 luma, rounded half-up to 0..255.
GrayImage to_gray(const ImageBuffer& image);
// 255 where the mask is set.
GrayImage to_gray(const PixelMask& mask);

std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void write_pgm(const std::string& path, const GrayImage& img);

}  // namespace maskris::io
