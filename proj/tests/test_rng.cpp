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
#include <set>
#include <vector>

#include "maskris/rng.hpp"

using maskris::RngStream;

TEST(Rng, SameSeedAndLabelRepeat) {
  RngStream a(42, "x");
  RngStream b(42, "x");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, CopyReplaysFromCopyPoint) {
  RngStream a(7, "x");
  for (int i = 0; i < 10; ++i) a.next_u64();
  RngStream b = a;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.uniform(), b.uniform());
  EXPECT_EQ(a.counter(), b.counter());
}

TEST(Rng, LabelsAndSeedsSeparateStreams) {
  RngStream a(1, "image");
  RngStream b(1, "text");
  RngStream c(2, "image");
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(Rng, DeriveDoesNotAdvanceParent) {
  RngStream a(3, "root");
  const auto before = a.counter();
  RngStream child = a.derive("epoch", 4);
  child.next_u64();
  EXPECT_EQ(a.counter(), before);
  RngStream again = a.derive("epoch", 4);
  RngStream child2 = a.derive("epoch", 4);
  EXPECT_EQ(again.next_u64(), child2.next_u64());
  EXPECT_NE(a.derive("epoch", 4).next_u64(), a.derive("epoch", 5).next_u64());
}

TEST(Rng, UniformMomentsWithinFourSigma) {
  RngStream r(11, "u");
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0 / 12.0, 1e-3);
}

TEST(Rng, UniformIntCoversRangeEvenly) {
  RngStream r(5, "int");
  const int k = 7, n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    const auto v = r.uniform_int(k);
    ASSERT_LT(v, static_cast<std::uint64_t>(k));
    ++counts[v];
  }
  const double p = 1.0 / k;
  for (int c : counts) EXPECT_NEAR(c, n * p, 4.0 * std::sqrt(n * p * (1 - p)));
}

TEST(Rng, NormalMoments) {
  RngStream r(9, "n");
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Rng, PoissonMean) {
  for (double mean : {0.5, 4.0, 60.0}) {
    RngStream r(13, "p");
    const int n = 50000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(r.poisson(mean));
    EXPECT_NEAR(sum / n, mean, 4.0 * std::sqrt(mean / n)) << "mean " << mean;
  }
}

TEST(Rng, BernoulliRate) {
  RngStream r(17, "b");
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.15);
  EXPECT_NEAR(hits, 0.15 * n, 4.0 * std::sqrt(n * 0.15 * 0.85));
  RngStream z(17, "b");
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(z.bernoulli(0.0));
    EXPECT_TRUE(z.bernoulli(1.0));
  }
}
