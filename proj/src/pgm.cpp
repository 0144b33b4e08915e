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

#include "maskris/pgm.hpp"

#include <algorithm>
#include <cmath>

#include "binio.hpp"

namespace maskris::io {

GrayImage to_gray(const ImageBuffer& image) {
  GrayImage g{image.height(), image.width(), {}};
  g.pixels.reserve(image.pixel_count());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double l = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) +
                       0.114 * image.at(y, x, 2);
      const double v = std::floor(std::clamp(l, 0.0, 1.0) * 255.0 + 0.5);
      g.pixels.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return g;
}

GrayImage to_gray(const PixelMask& mask) {
  GrayImage g{mask.height(), mask.width(), {}};
  g.pixels.reserve(mask.pixel_count());
  for (std::uint8_t b : mask.bits()) g.pixels.push_back(b ? 255 : 0);
  return g;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string head = "P5\n# version=" + std::to_string(kPgmVersion) + "\n" +
                           std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  binio::write_file_atomic(path, encode_pgm(img));
}

}  // namespace maskris::io
