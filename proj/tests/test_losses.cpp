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
#include "maskris/losses.hpp"
#include "test_util.hpp"

using namespace maskris;
using namespace maskris::loss;
using model::PredMask;

namespace {

PredMask filled(int h, int w, double v) { return PredMask{h, w, std::vector<double>(h * w, v)}; }

PredMask random_pred(int h, int w, RngStream& r) {
  PredMask p = filled(h, w, 0.0);
  for (double& v : p.prob) v = r.uniform(0.02, 0.98);
  return p;
}

// Reference values written directly from the definitions.
double ref_full(const PredMask& p, const std::vector<double>& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += t[i] * std::log(p.prob[i]) + (1.0 - t[i]) * std::log(1.0 - p.prob[i]);
  }
  return -s / static_cast<double>(t.size());
}

double ref_literal(const PredMask& p, const std::vector<double>& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * std::log(p.prob[i]);
  return -s / static_cast<double>(t.size());
}

std::vector<double> as_doubles(const PixelMask& m) {
  return std::vector<double>(m.bits().begin(), m.bits().end());
}

}  // namespace

TEST(Bce, HalfEverywhereIsLnTwo) {
  RngStream r(1, "l");
  const PixelMask y = fixtures::random_mask(8, 8, 0.3, r);
  EXPECT_NEAR(bce_loss(filled(8, 8, 0.5), y, true).value, std::log(2.0), 1e-15);
}

TEST(Bce, MatchesDefinitions) {
  RngStream r(2, "l");
  for (int t = 0; t < 20; ++t) {
    const PixelMask y = fixtures::random_mask(8, 8, 0.4, r);
    const PredMask p = random_pred(8, 8, r);
    EXPECT_NEAR(bce_loss(p, y, true).value, ref_full(p, as_doubles(y)), 1e-14);
    EXPECT_NEAR(bce_loss(p, y, false).value, ref_literal(p, as_doubles(y)), 1e-14);
  }
}

TEST(Bce, ApproachesZeroAtTarget) {
  RngStream r(3, "l");
  const PixelMask y = fixtures::random_mask(8, 8, 0.5, r);
  PredMask p = filled(8, 8, 0.0);
  const double eps = 1.0 / (1.0 + std::exp(30.0));
  for (std::size_t i = 0; i < p.prob.size(); ++i) p.prob[i] = y.bits()[i] ? 1.0 - eps : eps;
  const double v = bce_loss(p, y, true).value;
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-12);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
  RngStream r(4, "l");
  for (bool full : {true, false}) {
    const PixelMask y = fixtures::random_mask(8, 8, 0.4, r);
    PredMask p = random_pred(8, 8, r);
    const LossValue lv = bce_loss(p, y, full);
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.prob.size(); ++i) {
      const double x = p.prob[i];
      p.prob[i] = x + h;
      const double up = bce_loss(p, y, full).value;
      p.prob[i] = x - h;
      const double dn = bce_loss(p, y, full).value;
      p.prob[i] = x;
      const double fd = (up - dn) / (2 * h);
      if (fd == 0.0 && lv.grad[i] == 0.0) continue;
      EXPECT_LT(std::abs(fd - lv.grad[i]) / std::max(std::abs(fd), std::abs(lv.grad[i])), 1e-6);
    }
  }
}

TEST(Bce, GradientSignIsPredictionMinusTarget) {
  RngStream r(5, "l");
  const PixelMask y = fixtures::random_mask(8, 8, 0.5, r);
  const PredMask p = random_pred(8, 8, r);
  const LossValue lv = bce_loss(p, y, true);
  for (std::size_t i = 0; i < p.prob.size(); ++i) {
    const double diff = p.prob[i] - y.bits()[i];
    EXPECT_EQ(std::signbit(lv.grad[i]), std::signbit(diff));
  }
}

TEST(Bce, RejectsMismatchAndOutOfRange) {
  EXPECT_THROW(bce_loss(filled(8, 8, 0.5), PixelMask(4, 8), true), InvalidArgument);
  EXPECT_THROW(bce_loss(filled(2, 2, 1.0), PixelMask(2, 2), true), InvalidArgument);
  EXPECT_THROW(bce_loss(filled(2, 2, 0.0), PixelMask(2, 2), true), InvalidArgument);
}

TEST(Distill, SelfEntropyAndZeroGradientAtTeacher) {
  EXPECT_NEAR(distill_loss(filled(4, 4, 0.5), filled(4, 4, 0.5), true).value, std::log(2.0), 1e-15);
  RngStream r(6, "l");
  const PredMask t = random_pred(8, 8, r);
  const LossValue lv = distill_loss(t, t, true);
  double h = 0.0;
  for (double p : t.prob) h -= p * std::log(p) + (1 - p) * std::log(1 - p);
  EXPECT_NEAR(lv.value, h / 64.0, 1e-14);
  for (double g : lv.grad) EXPECT_NEAR(g, 0.0, 1e-15);
  // Minimized over the student at the teacher.
  PredMask s = t;
  for (double& p : s.prob) p = std::clamp(p + 0.05, 0.01, 0.99);
  EXPECT_GT(distill_loss(t, s, true).value, lv.value);
}

TEST(Distill, ConfidentMismatchIsLarge) {
  const double eps = 1e-6;
  const double v = distill_loss(filled(4, 4, 1.0 - eps), filled(4, 4, eps), true).value;
  EXPECT_NEAR(v, -std::log(eps), 1e-3);
}

TEST(Distill, RejectsMismatch) {
  EXPECT_THROW(distill_loss(filled(4, 4, 0.5), filled(2, 4, 0.5), true), InvalidArgument);
}

TEST(Total, LambdaWeights) {
  RngStream r(8, "l");
  const PixelMask y = fixtures::random_mask(8, 8, 0.4, r);
  const PredMask clean = random_pred(8, 8, r);
  const PredMask student = random_pred(8, 8, r);
  const LossValue ce = bce_loss(clean, y, true);
  const LossValue dist = distill_loss(clean, student, true);

  LossConfig cfg;
  cfg.lambda = 1.0;
  TotalLoss t1 = total_loss(ce, dist, cfg);
  EXPECT_EQ(t1.value, ce.value);
  EXPECT_EQ(t1.grad_clean, ce.grad);
  EXPECT_EQ(t1.dist_weight, 0.0);

  cfg.lambda = 0.0;
  TotalLoss t0 = total_loss(ce, dist, cfg);
  EXPECT_EQ(t0.value, dist.value);
  EXPECT_EQ(t0.grad_masked, dist.grad);
  EXPECT_EQ(t0.ce_weight, 0.0);

  cfg.lambda = 0.5;
  EXPECT_NEAR(total_loss(ce, dist, cfg).value, (ce.value + dist.value) / 2.0, 1e-15);

  for (double lam : {0.1, 0.3, 0.77}) {
    cfg.lambda = lam;
    const TotalLoss t = total_loss(ce, dist, cfg);
    EXPECT_NEAR(t.value, lam * ce.value + (1 - lam) * dist.value, 1e-15);
    for (std::size_t i = 0; i < ce.grad.size(); ++i) {
      EXPECT_NEAR(t.grad_clean[i], lam * ce.grad[i], 1e-15);
      EXPECT_NEAR(t.grad_masked[i], (1 - lam) * dist.grad[i], 1e-15);
    }
  }
  cfg.lambda = 1.5;
  EXPECT_THROW(total_loss(ce, dist, cfg), InvalidArgument);
  cfg.lambda = -0.1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Total, NoNonFiniteValuesInClampedRange) {
  const double lo = 1.0 / (1.0 + std::exp(30.0));
  const double hi = 1.0 / (1.0 + std::exp(-30.0));
  const PredMask a = filled(4, 4, lo);
  const PredMask b = filled(4, 4, hi);
  for (bool full : {true, false}) {
    for (const LossValue& lv : {bce_loss(a, PixelMask(4, 4, true), full),
                                bce_loss(b, PixelMask(4, 4, false), full),
                                distill_loss(a, b, full), distill_loss(b, a, full)}) {
      EXPECT_TRUE(std::isfinite(lv.value));
      for (double g : lv.grad) EXPECT_TRUE(std::isfinite(g));
    }
  }
}
