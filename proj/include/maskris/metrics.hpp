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

// Segmentation metrics and the robustness protocols.
//
// A pixel is foreground when its probability is >= 0.5. The IoU of two empty
// masks is defined as 1.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maskris/model.hpp"
#include "maskris/synthdata.hpp"
#include "maskris/types.hpp"

namespace maskris::metrics {

inline constexpr std::array<double, 3> kPrecisionThresholds = {0.5, 0.7, 0.9};
inline constexpr int kSeverities = 5;

PixelMask binarize(const model::PredMask& pred, double threshold = 0.5);

struct IoUCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;

  double iou() const;
};

// Throws InvalidArgument when dimensions differ.
IoUCounts iou_counts(const PixelMask& pred, const PixelMask& gt);
double iou(const PixelMask& pred, const PixelMask& gt);

struct EvalResult {
  std::vector<double> ious;
  std::vector<IoUCounts> counts;
  double miou = 0.0;
  double oiou = 0.0;
  // Fraction of samples with IoU strictly above each threshold, in
  // kPrecisionThresholds order.
  std::array<double, 3> p_at = {0.0, 0.0, 0.0};

  std::size_t size() const { return ious.size(); }
};

// Aggregates per-sample counts in index order. An empty input gives zeros.
EvalResult aggregate(std::span<const IoUCounts> counts);

EvalResult evaluate(const model::ModelState& state,
                    std::span<const synth::SampleRecord* const> samples);
EvalResult evaluate(const model::ModelState& state, std::span<const synth::SampleRecord> samples);

struct CorruptionRow {
  synth::Corruption kind;
  std::array<double, kSeverities> severity_oiou{};
  double mean_oiou = 0.0;  // arithmetic mean of the five entries
};

struct SubsetRow {
  std::string name;  // occlusion, relative_position, ordering
  EvalResult result;
};

struct RobustnessReport {
  EvalResult clean;
  std::vector<CorruptionRow> corruptions;
  std::vector<SubsetRow> subsets;
};

// Test hook: replaces the corruption kernel.
using CorruptFn = std::function<ImageBuffer(const ImageBuffer&, synth::Corruption, int severity,
                                            RngStream&)>;

struct RobustnessOptions {
  std::uint64_t seed = 0;
  double occlusion_fraction = 0.5;
  CorruptFn corrupt;  // empty selects synth::corrupt
};

// Occluded copies of the samples, one per sample whose referent can be
// occluded, each drawn from its own stream of `seed`.
std::vector<synth::SampleRecord> occluded_subset(std::span<const synth::SampleRecord* const> samples,
                                                 double fraction, std::uint64_t seed);

RobustnessReport robustness_report(const model::ModelState& state,
                                   std::span<const synth::SampleRecord* const> val,
                                   std::span<const synth::Corruption> kinds,
                                   const RobustnessOptions& opts);

}  // namespace maskris::metrics
