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

#include <cstdint>
#include <string>
#include <string_view>

namespace maskris {

// Counter-based random stream. Every draw is a pure function of
// (seed, label path, counter), so copying a stream and drawing from both
// copies yields identical sequences, and child streams derived with different
// labels or indices never share state with their parent.
//
// Distributions are implemented here rather than taken from <random>: the
// standard distributions are implementation-defined and would make datasets
// and checkpoints differ between standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label);

  // Child stream for (label, index). Does not advance this stream.
  RngStream derive(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p);
  double normal();
  std::uint64_t poisson(double mean);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t counter() const { return counter_; }

 private:
  RngStream(std::uint64_t seed, std::string label, std::uint64_t key);

  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
// FNV-1a over bytes.
std::uint64_t hash_label(std::string_view s);

}  // namespace maskris
