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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "maskris/errors.hpp"
#include "maskris/masking.hpp"
#include "maskris/vocab.hpp"
#include "test_util.hpp"

using namespace maskris;
using namespace maskris::masking;

namespace {

// Every 4-connected component of masked cells is exactly its bounding box
// when the mask is a single rectangle; for unions we only need each masked
// cell to belong to some fully masked rectangle of the block sampler's size
// bounds, which the count check below covers.
int count_rect_components(const PixelMask& m, bool* all_rectangles) {
  const int h = m.height(), w = m.width();
  std::vector<int> label(static_cast<std::size_t>(h * w), -1);
  int comps = 0;
  *all_rectangles = true;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.get(y, x) || label[static_cast<std::size_t>(y * w + x)] >= 0) continue;
      std::vector<std::pair<int, int>> stack = {{y, x}};
      label[static_cast<std::size_t>(y * w + x)] = comps;
      int x0 = x, x1 = x, y0 = y, y1 = y, n = 0;
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        ++n;
        x0 = std::min(x0, cx), x1 = std::max(x1, cx), y0 = std::min(y0, cy), y1 = std::max(y1, cy);
        const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (auto& dd : d) {
          const int ny = cy + dd[0], nx = cx + dd[1];
          if (ny < 0 || nx < 0 || ny >= h || nx >= w || !m.get(ny, nx)) continue;
          auto& l = label[static_cast<std::size_t>(ny * w + nx)];
          if (l < 0) {
            l = comps;
            stack.push_back({ny, nx});
          }
        }
      }
      if (n != (x1 - x0 + 1) * (y1 - y0 + 1)) *all_rectangles = false;
      ++comps;
    }
  }
  return comps;
}

}  // namespace

TEST(PatchGrid, DerivedCounts) {
  const PatchGrid g = PatchGrid::make(448, 448, 32);
  EXPECT_EQ(g.rows, 14);
  EXPECT_EQ(g.cols, 14);
  EXPECT_EQ(g.cells(), 196);
  EXPECT_THROW(PatchGrid::make(64, 64, 7), InvalidArgument);
}

TEST(TargetCells, RoundsHalfUp) {
  EXPECT_EQ(target_cells(0.75, 196), 147);
  EXPECT_EQ(target_cells(0.5, 3), 2);  // 1.5 -> 2
  EXPECT_EQ(target_cells(0.25, 2), 1);  // 0.5 -> 1
  EXPECT_EQ(target_cells(0.0, 64), 0);
  EXPECT_EQ(target_cells(1.0, 64), 64);
}

TEST(PatchMask, ExactCountAtPaperGeometry) {
  const PatchGrid g = PatchGrid::make(448, 448, 32);
  for (std::uint64_t s = 0; s < 200; ++s) {
    RngStream r(s, "m");
    EXPECT_EQ(sample_patch_mask(g, 0.75, r).count(), 147);
  }
}

TEST(PatchMask, RatioZeroAndOne) {
  const PatchGrid g = PatchGrid::make(64, 64, 8);
  RngStream r(1, "m");
  EXPECT_EQ(sample_patch_mask(g, 0.0, r).count(), 0);
  EXPECT_EQ(sample_patch_mask(g, 1.0, r).count(), 64);
  EXPECT_THROW(sample_patch_mask(g, 1.5, r), InvalidArgument);
  EXPECT_THROW(sample_patch_mask(g, -0.1, r), InvalidArgument);
}

TEST(PatchMask, DeterministicFromCopiedStream) {
  const PatchGrid g = PatchGrid::make(64, 64, 8);
  RngStream a(5, "m");
  RngStream b = a;
  EXPECT_EQ(sample_patch_mask(g, 0.75, a).masked, sample_patch_mask(g, 0.75, b).masked);
}

TEST(PatchMask, AllSubsetsOfSmallGridEquallyLikely) {
  // 2x2 grid, k = 2: six subsets, each with probability 1/6.
  const PatchGrid g = PatchGrid::make(4, 4, 2);
  std::map<std::vector<std::uint8_t>, int> seen;
  const int n = 60000;
  for (int s = 0; s < n; ++s) {
    RngStream r(static_cast<std::uint64_t>(s), "subset");
    ++seen[sample_patch_mask(g, 0.5, r).masked];
  }
  ASSERT_EQ(seen.size(), 6u);
  const double p = 1.0 / 6.0;
  for (const auto& [k, c] : seen) EXPECT_NEAR(c, n * p, 4.0 * std::sqrt(n * p * (1 - p)));
}

TEST(GridMask, FixedPhasePatterns) {
  const PatchGrid g = PatchGrid::make(8, 8, 2);  // 4 x 4 cells
  const PatchMask m75 = grid_mask_with_phase(g, 0.75, 0, 0);
  EXPECT_EQ(m75.count(), 12);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(m75.at(r, c), !(r % 2 == 0 && c % 2 == 0));
  const PatchMask m50 = grid_mask_with_phase(g, 0.5, 0, 0);
  EXPECT_EQ(m50.count(), 8);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(m50.at(r, c), r % 2 == 1);
  EXPECT_EQ(grid_mask_with_phase(g, 0.25, 1, 1).count(), 4);
}

TEST(GridMask, CountsAndDeterminism) {
  const PatchGrid g = PatchGrid::make(56, 56, 8);  // odd 7 x 7 grid
  for (double ratio : {0.25, 0.5, 0.75}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      RngStream a(s, "grid");
      RngStream b(s, "grid");
      const PatchMask m = sample_grid_mask(g, ratio, a);
      EXPECT_EQ(m.masked, sample_grid_mask(g, ratio, b).masked);
      EXPECT_LE(std::abs(m.count() - target_cells(ratio, g.cells())), g.rows + g.cols);
    }
  }
  RngStream r(0, "grid");
  EXPECT_THROW(sample_grid_mask(g, 0.6, r), InvalidArgument);
}

TEST(BlockMask, ReachesTargetWithRectangularBlocks) {
  const PatchGrid g = PatchGrid::make(448, 448, 32);
  for (std::uint64_t s = 0; s < 100; ++s) {
    RngStream r(s, "block");
    const PatchMask m = sample_block_mask(g, 0.75, r);
    EXPECT_GE(m.count(), 147);
    EXPECT_DOUBLE_EQ(m.ratio, m.count() / 196.0);
  }
  RngStream r(1, "block");
  EXPECT_EQ(sample_block_mask(g, 1.0, r).count(), 196);
  EXPECT_THROW(sample_block_mask(PatchGrid::make(6, 6, 2), 0.5, r), InvalidArgument);
}

TEST(BlockMask, MeanFractionNearTarget) {
  const PatchGrid g = PatchGrid::make(448, 448, 32);
  double sum = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    RngStream r(static_cast<std::uint64_t>(s), "block-mean");
    sum += sample_block_mask(g, 0.75, r).ratio;
  }
  const double mean = sum / n;
  EXPECT_GE(mean, 0.75);
  EXPECT_LE(mean, 0.80);
}

TEST(CutoutMask, SingleRectangleInside) {
  double sum = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    RngStream r(static_cast<std::uint64_t>(s), "cutout");
    const PixelMask m = sample_cutout_mask(64, 64, r);
    bool rect = false;
    if (s < 500) {
      ASSERT_EQ(count_rect_components(m, &rect), 1);
      ASSERT_TRUE(rect);
    }
    sum += static_cast<double>(m.count()) / 4096.0;
  }
  EXPECT_NEAR(sum / n, (0.02 + 1.0 / 3.0) / 2.0, 0.01);
  RngStream r(0, "cutout");
  EXPECT_THROW(sample_cutout_mask(4, 64, r), InvalidArgument);
  RngStream a(3, "cutout"), b(3, "cutout");
  EXPECT_EQ(sample_cutout_mask(32, 48, a), sample_cutout_mask(32, 48, b));
}

TEST(Rasterize, QuadrantAndCounts) {
  const PatchGrid g = PatchGrid::make(4, 4, 2);
  PatchMask m;
  m.grid = g;
  m.masked = {0, 1, 0, 0};
  const PixelMask px = rasterize(m);
  EXPECT_EQ(px.count(), 4u);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(px.get(y, x), y < 2 && x >= 2);
  m.masked = {0, 0, 0, 0};
  EXPECT_EQ(rasterize(m).count(), 0u);
  RngStream r(2, "m");
  const PatchMask pm = sample_patch_mask(PatchGrid::make(64, 64, 8), 0.75, r);
  EXPECT_EQ(rasterize(pm).count(), static_cast<std::size_t>(pm.count()) * 64);
}

TEST(ApplyImageMask, ZeroFillAndIdentity) {
  RngStream r(3, "img");
  const ImageBuffer img = fixtures::random_image(8, 8, r);
  EXPECT_EQ(apply_image_mask(img, PixelMask(8, 8, false)), img);
  const ImageBuffer all = apply_image_mask(img, PixelMask(8, 8, true));
  for (float v : all.values()) EXPECT_EQ(v, 0.0f);
  PixelMask one(8, 8);
  one.set(3, 5, true);
  const ImageBuffer out = apply_image_mask(img, one);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(out.at(y, x, c), (y == 3 && x == 5) ? 0.0f : img.at(y, x, c));
      }
  EXPECT_EQ(apply_image_mask(out, one), out);  // idempotent
  EXPECT_THROW(apply_image_mask(img, PixelMask(4, 8)), InvalidArgument);
}

TEST(MaskTokens, IdentityAtZeroRatioAndPaddingUntouched) {
  const Vocabulary vocab = Vocabulary::standard();
  RngStream r(4, "tok");
  const TokenSequence t = fixtures::random_tokens(5, vocab.size(), r);
  TextMaskConfig cfg;
  cfg.select_ratio = 0.0;
  const TextMaskResult res = mask_tokens(t, cfg, vocab.size(), r);
  EXPECT_EQ(res.tokens, t);
  cfg.select_ratio = 1.0;
  for (int i = 0; i < 200; ++i) {
    const TextMaskResult all = mask_tokens(t, cfg, vocab.size(), r);
    for (int p = 5; p < kDefaultMaxTokens; ++p) {
      EXPECT_EQ(all.tokens.ids[p], kPadId);
      EXPECT_EQ(all.selected[p], 0);
    }
    for (int p = 0; p < 5; ++p) {
      EXPECT_EQ(all.selected[p], 1);
      EXPECT_NE(all.tokens.ids[p], kPadId);
      EXPECT_NE(all.tokens.ids[p], kUnkId);
    }
  }
}

TEST(MaskTokens, ExpectedCountsOnTwentyTokens) {
  const Vocabulary vocab = Vocabulary::standard();
  RngStream r(5, "tok");
  const TokenSequence t = fixtures::random_tokens(20, vocab.size(), r);
  const int draws = 20000;
  double selected = 0.0, masked = 0.0;
  for (int d = 0; d < draws; ++d) {
    const TextMaskResult res = mask_tokens(t, TextMaskConfig{}, vocab.size(), r);
    for (int p = 0; p < 20; ++p) {
      selected += res.selected[p];
      masked += res.tokens.ids[p] == kMaskId;
    }
  }
  // 3.0 selected and 2.4 replaced by MASK per sequence on average.
  EXPECT_NEAR(selected / draws, 3.0, 4.0 * std::sqrt(20 * 0.15 * 0.85 / draws));
  EXPECT_NEAR(masked / draws, 2.4, 4.0 * std::sqrt(20 * 0.12 * 0.88 / draws));
}

TEST(MaskTokens, RejectsBadProbabilities) {
  TextMaskConfig cfg;
  cfg.p_mask = 0.7;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  RngStream r(0, "tok");
  const TokenSequence t = fixtures::random_tokens(3, 19, r);
  EXPECT_THROW(mask_tokens(t, cfg, 19, r), InvalidArgument);
}

TEST(FullMaskProb, ExactValues) {
  EXPECT_EQ(exact_full_mask_prob(196, 147, 1), 0.75);
  EXPECT_EQ(exact_full_mask_prob(196, 147, 0), 1.0);
  EXPECT_NEAR(exact_full_mask_prob(196, 147, 2), (147.0 * 146.0) / (196.0 * 195.0), 1e-15);
  EXPECT_EQ(exact_full_mask_prob(196, 147, 148), 0.0);
  EXPECT_THROW(exact_full_mask_prob(10, 11, 1), InvalidArgument);
  EXPECT_THROW(exact_full_mask_prob(10, 5, -1), InvalidArgument);
}

TEST(FullMaskProb, MonotoneInArguments) {
  for (int k = 0; k < 20; ++k) {
    EXPECT_GE(exact_full_mask_prob(196, 147, k), exact_full_mask_prob(196, 147, k + 1));
  }
  for (int m = 10; m < 196; ++m) {
    EXPECT_LE(exact_full_mask_prob(196, m, 4), exact_full_mask_prob(196, m + 1, 4));
  }
}

TEST(FullMaskProb, MonteCarloAgrees) {
  for (auto [cells, masked, k] : {std::tuple{196, 147, 2}, std::tuple{64, 48, 3},
                                  std::tuple{256, 100, 8}, std::tuple{16, 8, 1}}) {
    RngStream r(9, "mc");
    const auto mc = mc_full_mask_prob(cells, masked, k, 100000, r);
    EXPECT_NEAR(mc.estimate, exact_full_mask_prob(cells, masked, k), 3.0 * mc.std_error + 1e-12)
        << cells << "," << masked << "," << k;
  }
  RngStream r(9, "mc");
  EXPECT_EQ(mc_full_mask_prob(196, 147, 148, 1000, r).estimate, 0.0);
}
