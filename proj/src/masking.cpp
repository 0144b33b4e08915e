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

#include "maskris/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "maskris/errors.hpp"
#include "maskris/kernels.hpp"

namespace maskris::masking {

namespace {

constexpr double kMinAspect = 0.3;
constexpr double kMaxAspect = 1.0 / 0.3;
constexpr double kCutoutMinArea = 0.02;
constexpr double kCutoutMaxArea = 1.0 / 3.0;

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("masking ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
}

PatchMask empty_mask(const PatchGrid& grid) {
  PatchMask m;
  m.grid = grid;
  m.masked.assign(static_cast<std::size_t>(grid.cells()), 0);
  return m;
}

bool aspect_ok(int h, int w) {
  const double a = static_cast<double>(h) / static_cast<double>(w);
  return a >= kMinAspect - 1e-12 && a <= kMaxAspect + 1e-12;
}

}  // namespace

PatchGrid PatchGrid::make(int image_height, int image_width, int patch_size) {
  if (patch_size <= 0 || image_height <= 0 || image_width <= 0) {
    throw InvalidArgument("patch grid dimensions must be positive");
  }
  if (image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw InvalidArgument("patch size " + std::to_string(patch_size) +
                          " does not divide image " + std::to_string(image_height) +
                          "x" + std::to_string(image_width));
  }
  return PatchGrid{image_height, image_width, patch_size, image_height / patch_size,
                   image_width / patch_size};
}

int PatchMask::count() const {
  return static_cast<int>(std::count(masked.begin(), masked.end(), std::uint8_t{1}));
}

Strategy parse_strategy(std::string_view name) {
  if (name == "patch") return Strategy::kPatch;
  if (name == "grid") return Strategy::kGrid;
  if (name == "block") return Strategy::kBlock;
  if (name == "cutout") return Strategy::kCutout;
  throw InvalidArgument("unknown mask strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kPatch:
      return "patch";
    case Strategy::kGrid:
      return "grid";
    case Strategy::kBlock:
      return "block";
    case Strategy::kCutout:
      return "cutout";
  }
  return "patch";
}

int target_cells(double ratio, int cells) {
  return static_cast<int>(std::floor(ratio * static_cast<double>(cells) + 0.5));
}

std::vector<std::uint8_t> sample_subset(int n, int k, RngStream& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
    std::swap(order[i], order[j]);
    flags[order[i]] = 1;
  }
  return flags;
}

PatchMask sample_patch_mask(const PatchGrid& grid, double ratio, RngStream& rng) {
  check_ratio(ratio);
  PatchMask m;
  m.grid = grid;
  m.ratio = ratio;
  m.masked = sample_subset(grid.cells(), target_cells(ratio, grid.cells()), rng);
  return m;
}

PatchMask grid_mask_with_phase(const PatchGrid& grid, double ratio, int row_phase,
                               int col_phase) {
  PatchMask m = empty_mask(grid);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const bool row_on = (r + row_phase) % 2 == 0;
      const bool col_on = (c + col_phase) % 2 == 0;
      bool masked = false;
      if (ratio == 0.75) {
        masked = !(row_on && col_on);  // keep one cell per 2x2 tile
      } else if (ratio == 0.5) {
        masked = !row_on;  // keep every other row
      } else if (ratio == 0.25) {
        masked = row_on && col_on;  // drop one cell per 2x2 tile
      } else {
        throw InvalidArgument("grid masking supports ratios 0.25, 0.5, 0.75; got " +
                              std::to_string(ratio));
      }
      m.masked[static_cast<std::size_t>(r) * grid.cols + c] = masked ? 1 : 0;
    }
  }
  m.ratio = static_cast<double>(m.count()) / grid.cells();
  return m;
}

PatchMask sample_grid_mask(const PatchGrid& grid, double ratio, RngStream& rng) {
  if (ratio != 0.25 && ratio != 0.5 && ratio != 0.75) {
    throw InvalidArgument("grid masking supports ratios 0.25, 0.5, 0.75; got " +
                          std::to_string(ratio));
  }
  const int row_phase = static_cast<int>(rng.uniform_int(2));
  const int col_phase = static_cast<int>(rng.uniform_int(2));
  return grid_mask_with_phase(grid, ratio, row_phase, col_phase);
}

PatchMask sample_block_mask(const PatchGrid& grid, double ratio, RngStream& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("block masking ratio must lie in (0, 1]");
  }
  const int cells = grid.cells();
  if (cells < 16) throw InvalidArgument("block masking needs at least 16 patch cells");
  const int target = std::max(1, target_cells(ratio, cells));
  const int min_area = std::min(16, cells / 4);
  const double log_lo = std::log(kMinAspect);
  const double log_hi = std::log(kMaxAspect);

  PatchMask m = empty_mask(grid);
  int masked = 0;
  int stalled = 0;
  while (masked < target) {
    // Draw a block shape that fits the grid.
    int h = 0;
    int w = 0;
    for (int tries = 0;; ++tries) {
      if (tries > 1000) throw InvalidArgument("grid too narrow for block masking");
      const double max_area = std::max<double>(min_area, target - masked);
      const double area = rng.uniform(min_area, max_area);
      const double aspect = std::exp(rng.uniform(log_lo, log_hi));
      h = static_cast<int>(std::lround(std::sqrt(area * aspect)));
      w = static_cast<int>(std::lround(std::sqrt(area / aspect)));
      if (h >= 1 && w >= 1 && h <= grid.rows && w <= grid.cols && h * w >= min_area &&
          aspect_ok(h, w)) {
        break;
      }
    }
    int top = 0;
    int left = 0;
    if (stalled < 10) {
      top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(grid.rows - h + 1)));
      left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(grid.cols - w + 1)));
    } else {
      // Anchor the block on a random unmasked cell so every iteration makes
      // progress once random placement keeps landing on masked area.
      std::vector<int> free_cells;
      for (int i = 0; i < cells; ++i) {
        if (!m.masked[static_cast<std::size_t>(i)]) free_cells.push_back(i);
      }
      const int anchor = free_cells[rng.uniform_int(free_cells.size())];
      const int ar = anchor / grid.cols;
      const int ac = anchor % grid.cols;
      const int top_lo = std::max(0, ar - h + 1);
      const int top_hi = std::min(ar, grid.rows - h);
      const int left_lo = std::max(0, ac - w + 1);
      const int left_hi = std::min(ac, grid.cols - w);
      top = top_lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(top_hi - top_lo + 1)));
      left = left_lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(left_hi - left_lo + 1)));
    }
    int added = 0;
    for (int r = top; r < top + h; ++r) {
      for (int c = left; c < left + w; ++c) {
        auto& cell = m.masked[static_cast<std::size_t>(r) * grid.cols + c];
        if (!cell) {
          cell = 1;
          ++added;
        }
      }
    }
    masked += added;
    stalled = added == 0 ? stalled + 1 : 0;
  }
  m.ratio = static_cast<double>(masked) / cells;
  return m;
}

PixelMask sample_cutout_mask(int height, int width, RngStream& rng) {
  if (height < 8 || width < 8) throw InvalidArgument("cutout needs an image of at least 8x8");
  const double area = static_cast<double>(height) * width;
  const double log_lo = std::log(kMinAspect);
  const double log_hi = std::log(kMaxAspect);
  int h = 0;
  int w = 0;
  for (;;) {
    const double target = rng.uniform(kCutoutMinArea, kCutoutMaxArea) * area;
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    h = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    w = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (h >= 1 && w >= 1 && h < height && w < width) break;
  }
  const int top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(height - h + 1)));
  const int left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(width - w + 1)));
  PixelMask mask(height, width);
  for (int y = top; y < top + h; ++y) {
    for (int x = left; x < left + w; ++x) mask.set(y, x, true);
  }
  return mask;
}

PixelMask rasterize(const PatchMask& mask) {
  const PatchGrid& g = mask.grid;
  PixelMask out(g.image_height, g.image_width);
  for (int y = 0; y < g.image_height; ++y) {
    const int r = y / g.patch_size;
    for (int x = 0; x < g.image_width; ++x) {
      if (mask.at(r, x / g.patch_size)) out.set(y, x, true);
    }
  }
  return out;
}

PixelMask sample_pixel_mask(Strategy strategy, int height, int width, int patch_size,
                            double ratio, RngStream& rng) {
  if (strategy == Strategy::kCutout) return sample_cutout_mask(height, width, rng);
  const PatchGrid grid = PatchGrid::make(height, width, patch_size);
  switch (strategy) {
    case Strategy::kPatch:
      return rasterize(sample_patch_mask(grid, ratio, rng));
    case Strategy::kGrid:
      return rasterize(sample_grid_mask(grid, ratio, rng));
    case Strategy::kBlock:
      return rasterize(sample_block_mask(grid, ratio, rng));
    case Strategy::kCutout:
      break;
  }
  throw InvalidArgument("unhandled mask strategy");
}

ImageBuffer apply_image_mask(const ImageBuffer& image, const PixelMask& mask) {
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw InvalidArgument("image and mask dimensions differ");
  }
  ImageBuffer out = image;
  simd::kernels().zero_masked_pixels(out.values().data(), mask.bits().data(),
                                     mask.pixel_count());
  return out;
}

void TextMaskConfig::validate() const {
  for (double p : {select_ratio, p_mask, p_random, p_unchanged}) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("text mask probabilities must lie in [0, 1]");
  }
  if (std::abs(p_mask + p_random + p_unchanged - 1.0) > 1e-12) {
    throw InvalidArgument("p_mask + p_random + p_unchanged must equal 1");
  }
}

TextMaskResult mask_tokens(const TokenSequence& tokens, const TextMaskConfig& cfg,
                           int vocab_size, RngStream& rng) {
  cfg.validate();
  if (vocab_size <= kFirstWordId) {
    throw InvalidArgument("vocabulary has no non-reserved words");
  }
  TextMaskResult out{tokens, std::vector<std::uint8_t>(tokens.ids.size(), 0),
                     std::vector<TextBranch>(tokens.ids.size(), TextBranch::kNone)};
  for (int i = 0; i < tokens.valid_len; ++i) {
    if (!rng.bernoulli(cfg.select_ratio)) continue;
    out.selected[static_cast<std::size_t>(i)] = 1;
    const double u = rng.uniform();
    auto& id = out.tokens.ids[static_cast<std::size_t>(i)];
    auto& branch = out.branch[static_cast<std::size_t>(i)];
    if (u < cfg.p_mask) {
      id = kMaskId;
      branch = TextBranch::kMask;
    } else if (u < cfg.p_mask + cfg.p_random) {
      id = static_cast<std::uint16_t>(
          kFirstWordId + rng.uniform_int(static_cast<std::uint64_t>(vocab_size - kFirstWordId)));
      branch = TextBranch::kRandom;
    } else {
      branch = TextBranch::kUnchanged;
    }
  }
  return out;
}

double exact_full_mask_prob(int cells, int masked, int object_cells) {
  if (cells < 0 || masked < 0 || object_cells < 0 || masked > cells || object_cells > cells) {
    throw InvalidArgument("exact_full_mask_prob: need 0 <= object_cells, masked <= cells");
  }
  if (object_cells > masked) return 0.0;
  double p = 1.0;
  for (int i = 0; i < object_cells; ++i) {
    p *= static_cast<double>(masked - i) / static_cast<double>(cells - i);
  }
  return p;
}

MonteCarloEstimate mc_full_mask_prob(int cells, int masked, int object_cells,
                                     std::int64_t draws, RngStream& rng) {
  if (draws < 1) throw InvalidArgument("mc_full_mask_prob: draws must be >= 1");
  if (cells < 0 || masked < 0 || object_cells < 0 || masked > cells || object_cells > cells) {
    throw InvalidArgument("mc_full_mask_prob: need 0 <= object_cells, masked <= cells");
  }
  // The object occupies cells [0, object_cells); by exchangeability of the
  // uniform subset any fixed placement gives the same probability.
  std::int64_t hits = 0;
  for (std::int64_t d = 0; d < draws; ++d) {
    const auto flags = sample_subset(cells, masked, rng);
    bool all = true;
    for (int i = 0; i < object_cells && all; ++i) all = flags[static_cast<std::size_t>(i)] != 0;
    hits += all ? 1 : 0;
  }
  MonteCarloEstimate est;
  est.estimate = static_cast<double>(hits) / static_cast<double>(draws);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(draws));
  return est;
}

}  // namespace maskris::masking
