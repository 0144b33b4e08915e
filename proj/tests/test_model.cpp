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

#include "maskris/errors.hpp"
#include "maskris/model.hpp"
#include "test_util.hpp"

using namespace maskris;
using namespace maskris::model;

namespace {

struct Instance {
  ModelState state;
  ImageBuffer image;
  TokenSequence tokens;
  std::vector<double> upstream;
};

Instance make_instance(std::uint64_t seed) {
  RngStream r(seed, "model-test");
  Instance in{init_params(fixtures::small_config(), r), {}, {}, {}};
  // Move off the initial point so no block sits at a special value.
  for (double& v : in.state.mutable_params()) v += 0.1 * r.uniform(-1.0, 1.0);
  in.image = fixtures::random_image(16, 16, r);
  in.tokens = fixtures::random_tokens(4, in.state.config().vocab_size, r);
  in.upstream.resize(256);
  for (double& v : in.upstream) v = r.uniform(-1.0, 1.0);
  return in;
}

}  // namespace

TEST(Model, OutputShapeAndRange) {
  const Instance in = make_instance(1);
  const ForwardResult f = forward(in.state, in.image, in.tokens);
  EXPECT_EQ(f.pred.height, 16);
  EXPECT_EQ(f.pred.width, 16);
  ASSERT_EQ(f.pred.size(), 256u);
  const double lo = 1.0 / (1.0 + std::exp(kLogitClamp));
  const double hi = 1.0 / (1.0 + std::exp(-kLogitClamp));
  for (double p : f.pred.prob) {
    EXPECT_GE(p, lo * (1 - 1e-12));
    EXPECT_LE(p, hi);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Model, ForwardIsDeterministicAndMatchesPredict) {
  const Instance in = make_instance(2);
  const ForwardResult a = forward(in.state, in.image, in.tokens);
  const ForwardResult b = forward(in.state, in.image, in.tokens);
  EXPECT_EQ(a.pred.prob, b.pred.prob);
  EXPECT_EQ(predict(in.state, in.image, in.tokens).prob, a.pred.prob);
}

TEST(Model, InitIsSeededFiniteAndCentered) {
  const ModelConfig cfg;
  RngStream a(5, "init"), b(5, "init"), c(6, "init");
  const ModelState sa = init_params(cfg, a);
  EXPECT_TRUE(sa.same_values(init_params(cfg, b)));
  EXPECT_FALSE(sa.same_values(init_params(cfg, c)));
  EXPECT_TRUE(sa.all_finite());
  EXPECT_EQ(sa.step(), 0u);
  for (double m : sa.first_moment()) EXPECT_EQ(m, 0.0);
  for (double v : sa.second_moment()) EXPECT_EQ(v, 0.0);

  // Patch projection weights: Uniform(+-1/sqrt(fan_in)).
  const ParamLayout& L = sa.layout();
  const std::size_t n = static_cast<std::size_t>(cfg.patch_dim()) * cfg.embed_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.patch_dim()));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sa.params()[L.patch_w + i];
    ASSERT_LE(std::abs(w), bound);
    sum += w;
  }
  EXPECT_NEAR(sum / n, 0.0, 3.0 * bound / std::sqrt(3.0 * n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.vocab_size) * cfg.embed_dim; ++i) {
    ASSERT_LE(std::abs(sa.params()[L.word_emb + i]), 0.02);
  }
}

TEST(Model, ZeroUpstreamGivesZeroGradient) {
  const Instance in = make_instance(3);
  const ForwardResult f = forward(in.state, in.image, in.tokens);
  const ParamGrads g = backward(f.cache, std::vector<double>(256, 0.0));
  for (double v : g) ASSERT_EQ(v, 0.0);
}

TEST(Model, GradientMatchesFiniteDifferences) {
  const Instance in = make_instance(4);
  const fixtures::GradCheck gc =
      fixtures::check_gradients(in.state, in.image, in.tokens, in.upstream, 1e-4, 1e-6);
  EXPECT_LT(gc.max_rel_error, 1e-4) << "worst parameter " << gc.worst_index;
}

TEST(Model, UnusedWordRowsGetZeroGradient) {
  const Instance in = make_instance(5);
  const ForwardResult f = forward(in.state, in.image, in.tokens);
  const ParamGrads g = backward(f.cache, in.upstream);
  const ParamLayout& L = in.state.layout();
  const int D = in.state.config().embed_dim;
  std::vector<bool> used(static_cast<std::size_t>(in.state.config().vocab_size), false);
  for (int i = 0; i < in.tokens.valid_len; ++i) used[in.tokens.ids[static_cast<std::size_t>(i)]] = true;
  for (std::size_t w = 0; w < used.size(); ++w) {
    double norm = 0.0;
    for (int d = 0; d < D; ++d) norm += std::abs(g[L.word_emb + w * D + static_cast<std::size_t>(d)]);
    if (used[w]) {
      EXPECT_GT(norm, 0.0) << "word " << w;
    } else {
      EXPECT_EQ(norm, 0.0) << "word " << w;
    }
  }
  EXPECT_FALSE(used[kPadId]);
}

TEST(Model, PaddingInvariance) {
  const Instance in = make_instance(6);
  const PredMask ref = predict(in.state, in.image, in.tokens);
  // Longer padded buffer, same valid prefix.
  TokenSequence longer = in.tokens;
  longer.ids.resize(40, kPadId);
  EXPECT_EQ(predict(in.state, in.image, longer).prob, ref.prob);
  // Swapping two padding positions.
  TokenSequence swapped = in.tokens;
  std::swap(swapped.ids[10], swapped.ids[15]);
  EXPECT_EQ(predict(in.state, in.image, swapped).prob, ref.prob);
}

TEST(Model, StaleCacheIsRejected) {
  Instance in = make_instance(7);
  const ForwardResult f = forward(in.state, in.image, in.tokens);
  in.state.mutable_params()[0] += 1e-3;
  EXPECT_THROW(backward(f.cache, in.upstream), InvalidState);
}

TEST(Model, RejectsBadInputs) {
  const Instance in = make_instance(8);
  EXPECT_THROW(forward(in.state, ImageBuffer(24, 16), in.tokens), InvalidArgument);
  TokenSequence empty = in.tokens;
  empty.valid_len = 0;
  EXPECT_THROW(forward(in.state, in.image, empty), InvalidArgument);
  TokenSequence oov = in.tokens;
  oov.ids[0] = 500;
  EXPECT_THROW(forward(in.state, in.image, oov), InvalidArgument);
  EXPECT_THROW(backward(forward(in.state, in.image, in.tokens).cache, std::vector<double>(3)),
               InvalidArgument);
}

TEST(Model, ExtremeInputsStayFinite) {
  Instance in = make_instance(9);
  for (double& v : in.state.mutable_params()) v *= 50.0;
  const ForwardResult f = forward(in.state, in.image, in.tokens);
  for (double p : f.pred.prob) ASSERT_TRUE(std::isfinite(p) && p > 0.0 && p < 1.0);
  const ParamGrads g = backward(f.cache, in.upstream);
  for (double v : g) ASSERT_TRUE(std::isfinite(v));
}

TEST(Model, BackwardAccumulateScales) {
  const Instance in = make_instance(10);
  const ForwardResult f = forward(in.state, in.image, in.tokens);
  const ParamGrads g = backward(f.cache, in.upstream);
  std::vector<double> acc(g.size(), 1.0);
  backward_accumulate(f.cache, in.upstream, 0.25, acc);
  for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(acc[i], 1.0 + 0.25 * g[i], 1e-15);
}
