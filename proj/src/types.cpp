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

#include "maskris/types.hpp"

#include <algorithm>

namespace maskris {

ImageBuffer::ImageBuffer(int height, int width, float fill)
    : height_(height),
      width_(width),
      data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * kChannels, fill) {}

PixelMask::PixelMask(int height, int width, bool fill)
    : height_(height),
      width_(width),
      bits_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill ? 1 : 0) {}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

}  // namespace maskris
