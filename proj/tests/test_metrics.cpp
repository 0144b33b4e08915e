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

#include <algorithm>
#include <numeric>

#include "maskris/errors.hpp"
#include "maskris/metrics.hpp"
#include "maskris/report.hpp"
#include "test_util.hpp"

using namespace maskris;
using namespace maskris::metrics;

namespace {

// Double loop over pixels, no kernels.
std::pair<std::uint64_t, std::uint64_t> brute(const PixelMask& a, const PixelMask& b) {
  std::uint64_t i = 0, u = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      i += a.get(y, x) && b.get(y, x);
      u += a.get(y, x) || b.get(y, x);
    }
  return {i, u};
}

PixelMask square(int n, int x0, int y0, int side) {
  PixelMask m(n, n);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) m.set(y, x, true);
  return m;
}

model::PredMask filled(int h, int w, double v) {
  return model::PredMask{h, w, std::vector<double>(static_cast<std::size_t>(h * w), v)};
}

}  // namespace

TEST(Binarize, TieGoesToForeground) {
  EXPECT_EQ(binarize(filled(4, 4, 0.6)).count(), 16u);
  EXPECT_EQ(binarize(filled(4, 4, 0.4)).count(), 0u);
  EXPECT_EQ(binarize(filled(4, 4, 0.5)).count(), 16u);
  EXPECT_EQ(binarize(filled(4, 4, 0.7), 0.8).count(), 0u);
}

TEST(Iou, Examples) {
  const PixelMask a = square(4, 0, 0, 2);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, square(4, 2, 2, 2)), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, square(4, 1, 1, 2)), 1.0 / 7.0);
  EXPECT_EQ(iou(PixelMask(4, 4), PixelMask(4, 4)), 1.0);
  EXPECT_THROW(iou(PixelMask(4, 4), PixelMask(4, 5)), InvalidArgument);
}

TEST(Iou, MatchesBruteForceAndIsSymmetric) {
  RngStream r(1, "m");
  for (int t = 0; t < 200; ++t) {
    const PixelMask a = fixtures::random_mask(16, 16, r.uniform(), r);
    const PixelMask b = fixtures::random_mask(16, 16, r.uniform(), r);
    const IoUCounts c = iou_counts(a, b);
    const auto [bi, bu] = brute(a, b);
    ASSERT_EQ(c.intersection, bi);
    ASSERT_EQ(c.union_, bu);
    ASSERT_EQ(iou(a, b), iou(b, a));
  }
}

TEST(Aggregate, TwoSampleExample) {
  const std::vector<IoUCounts> c = {{1, 1}, {20, 100}};
  const EvalResult r = aggregate(c);
  EXPECT_DOUBLE_EQ(r.miou, 0.6);
  EXPECT_DOUBLE_EQ(r.oiou, 21.0 / 101.0);
  EXPECT_EQ(r.p_at[0], 0.5);  // only the perfect sample is above 0.5
  EXPECT_EQ(r.p_at[2], 0.5);
  EXPECT_EQ(r.size(), 2u);
}

TEST(Aggregate, PerfectAndCopies) {
  const std::vector<IoUCounts> perfect = {{5, 5}, {9, 9}, {0, 0}};
  const EvalResult p = aggregate(perfect);
  EXPECT_EQ(p.miou, 1.0);
  EXPECT_EQ(p.oiou, 1.0);
  for (double v : p.p_at) EXPECT_EQ(v, 1.0);
  const std::vector<IoUCounts> copies(7, IoUCounts{3, 11});
  const EvalResult c = aggregate(copies);
  EXPECT_DOUBLE_EQ(c.miou, 3.0 / 11.0);
  EXPECT_DOUBLE_EQ(c.oiou, 3.0 / 11.0);
  EXPECT_EQ(aggregate(std::vector<IoUCounts>{}).size(), 0u);
}

TEST(Aggregate, PrecisionIsStrictAndMonotone) {
  const std::vector<IoUCounts> c = {{5, 10}, {7, 10}, {9, 10}, {10, 10}};
  const EvalResult r = aggregate(c);
  EXPECT_EQ(r.p_at[0], 0.75);  // 0.5 is not above 0.5
  EXPECT_EQ(r.p_at[1], 0.5);
  EXPECT_EQ(r.p_at[2], 0.25);
  RngStream g(2, "m");
  for (int t = 0; t < 100; ++t) {
    std::vector<IoUCounts> rc;
    for (int i = 0; i < 10; ++i) {
      const auto u = 1 + g.uniform_int(50);
      rc.push_back({g.uniform_int(u + 1), u});
    }
    const EvalResult e = aggregate(rc);
    EXPECT_GE(e.p_at[0], e.p_at[1]);
    EXPECT_GE(e.p_at[1], e.p_at[2]);
    EXPECT_GE(e.miou, 0.0);
    EXPECT_LE(e.miou, 1.0);
  }
}

TEST(Iou, InvariantUnderPixelPermutation) {
  RngStream r(3, "m");
  const PixelMask a = fixtures::random_mask(16, 16, 0.4, r);
  const PixelMask b = fixtures::random_mask(16, 16, 0.6, r);
  std::vector<std::size_t> perm(256);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 255; i > 0; --i) std::swap(perm[i], perm[r.uniform_int(i + 1)]);
  PixelMask pa(16, 16), pb(16, 16);
  for (std::size_t i = 0; i < 256; ++i) {
    pa.bits()[i] = a.bits()[perm[i]];
    pb.bits()[i] = b.bits()[perm[i]];
  }
  EXPECT_EQ(iou(a, b), iou(pa, pb));
}

namespace {

struct Fixture {
  synth::Dataset ds = synth::generate_dataset(5, 200, synth::SceneConfig{});
  model::ModelState state;
  Fixture() {
    model::ModelConfig mc;
    mc.vocab_size = ds.vocab.size();
    RngStream r(1, "model");
    state = model::init_params(mc, r);
  }
};

}  // namespace

TEST(Robustness, IdentityCorruptionReproducesClean) {
  Fixture f;
  const auto val = f.ds.split(synth::Split::kVal);
  RobustnessOptions opts;
  opts.corrupt = [](const ImageBuffer& img, synth::Corruption, int, RngStream&) { return img; };
  const RobustnessReport rep = robustness_report(f.state, val, synth::kAllCorruptions, opts);
  ASSERT_EQ(rep.corruptions.size(), 5u);
  for (const CorruptionRow& c : rep.corruptions) {
    for (double s : c.severity_oiou) EXPECT_EQ(s, rep.clean.oiou);
    EXPECT_DOUBLE_EQ(c.mean_oiou, rep.clean.oiou);
  }
  ASSERT_EQ(rep.subsets.size(), 3u);
  EXPECT_EQ(rep.subsets[0].name, "occlusion");
  EXPECT_EQ(rep.subsets[1].name, "relative_position");
  EXPECT_EQ(rep.subsets[2].name, "ordering");
  std::size_t pos = 0;
  for (const auto* s : val) pos += (s->tags & synth::kTagRelativePosition) != 0;
  EXPECT_EQ(rep.subsets[1].result.size(), pos);
}

TEST(Robustness, MeanIsAverageOfFiveSeverities) {
  Fixture f;
  const auto val = f.ds.split(synth::Split::kVal);
  RobustnessOptions opts;
  opts.seed = 4;
  const RobustnessReport a = robustness_report(f.state, val, synth::kAllCorruptions, opts);
  const RobustnessReport b = robustness_report(f.state, val, synth::kAllCorruptions, opts);
  for (std::size_t k = 0; k < a.corruptions.size(); ++k) {
    const auto& s = a.corruptions[k].severity_oiou;
    EXPECT_DOUBLE_EQ(a.corruptions[k].mean_oiou, (s[0] + s[1] + s[2] + s[3] + s[4]) / 5.0);
    EXPECT_EQ(s, b.corruptions[k].severity_oiou);
  }
  const std::vector<synth::Corruption> two = {synth::Corruption::kBrightness,
                                              synth::Corruption::kContrast};
  EXPECT_EQ(robustness_report(f.state, val, two, opts).corruptions.size(), 2u);
}

TEST(Report, CsvShapes) {
  Fixture f;
  const auto val = f.ds.split(synth::Split::kVal);
  const RobustnessReport rep = robustness_report(f.state, val, synth::kAllCorruptions, {});
  const std::string csv = report::robustness_csv(rep);
  EXPECT_EQ(csv.rfind("# version=1\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 1 + 5 + 3);
  const std::string lng = report::robustness_long_csv(rep);
  EXPECT_NE(lng.find("kind,severity,metric,value"), std::string::npos);
  EXPECT_EQ(report::eval_csv(rep.clean).rfind("# version=1\n", 0), 0u);
}
