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

// Image and text masking samplers.
//
// Image masks are sampled on a grid of non-overlapping square patches and
// rasterized to pixel resolution; masked pixels are zeroed in every channel.
// Text masking follows the masked-language-model recipe: each valid token is
// selected independently, and a selected token becomes MASK, a random
// non-reserved word, or stays as it was.

#include <cstdint>
#include <string_view>
#include <vector>

#include "maskris/rng.hpp"
#include "maskris/types.hpp"

namespace maskris::masking {

struct PatchGrid {
  int image_height = 0;
  int image_width = 0;
  int patch_size = 0;
  int rows = 0;
  int cols = 0;

  // Throws InvalidArgument unless patch_size divides both dimensions.
  static PatchGrid make(int image_height, int image_width, int patch_size);

  int cells() const { return rows * cols; }
};

struct PatchMask {
  PatchGrid grid;
  std::vector<std::uint8_t> masked;  // rows * cols, row-major, 1 = masked
  double ratio = 0.0;

  bool at(int r, int c) const { return masked[static_cast<std::size_t>(r) * grid.cols + c] != 0; }
  int count() const;
};

enum class Strategy { kPatch, kGrid, kBlock, kCutout };

Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy s);

// round-half-up(ratio * cells)
int target_cells(double ratio, int cells);

// Uniform k-subset of {0..n-1} by partial Fisher-Yates; flags[i] = 1 when
// i is in the subset.
std::vector<std::uint8_t> sample_subset(int n, int k, RngStream& rng);

PatchMask sample_patch_mask(const PatchGrid& grid, double ratio, RngStream& rng);
// ratio must be 0.25, 0.5 or 0.75.
PatchMask sample_grid_mask(const PatchGrid& grid, double ratio, RngStream& rng);
// Deterministic-phase variant of the grid sampler, phases in {0, 1}.
PatchMask grid_mask_with_phase(const PatchGrid& grid, double ratio,
                               int row_phase, int col_phase);
PatchMask sample_block_mask(const PatchGrid& grid, double ratio, RngStream& rng);
PixelMask sample_cutout_mask(int height, int width, RngStream& rng);

PixelMask rasterize(const PatchMask& mask);

// Pixel mask for any strategy; cutout ignores ratio and patch size.
PixelMask sample_pixel_mask(Strategy strategy, int height, int width,
                            int patch_size, double ratio, RngStream& rng);

ImageBuffer apply_image_mask(const ImageBuffer& image, const PixelMask& mask);

struct TextMaskConfig {
  double select_ratio = 0.15;
  double p_mask = 0.8;
  double p_random = 0.1;
  double p_unchanged = 0.1;

  void validate() const;
};

enum class TextBranch : std::uint8_t { kNone = 0, kMask, kRandom, kUnchanged };

struct TextMaskResult {
  TokenSequence tokens;
  std::vector<std::uint8_t> selected;  // per position, 1 = selected
  // Which replacement each position took. A random draw can land on the
  // original word, so this is not recoverable from the tokens alone.
  std::vector<TextBranch> branch;
};

// vocab_size counts reserved IDs; random replacements are drawn from
// [kFirstWordId, vocab_size).
TextMaskResult mask_tokens(const TokenSequence& tokens, const TextMaskConfig& cfg,
                           int vocab_size, RngStream& rng);

// Probability that all object_cells patches covering an object fall inside a
// uniformly sampled masked subset of size `masked` out of `cells`.
double exact_full_mask_prob(int cells, int masked, int object_cells);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

MonteCarloEstimate mc_full_mask_prob(int cells, int masked, int object_cells,
                                     std::int64_t draws, RngStream& rng);

}  // namespace maskris::masking
