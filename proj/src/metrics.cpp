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

#include "maskris/metrics.hpp"

#include <numeric>

#include "maskris/errors.hpp"
#include "maskris/kernels.hpp"

namespace maskris::metrics {

PixelMask binarize(const model::PredMask& pred, double threshold) {
  PixelMask out(pred.height, pred.width);
  auto bits = out.bits();
  for (std::size_t i = 0; i < pred.prob.size(); ++i) bits[i] = pred.prob[i] >= threshold ? 1 : 0;
  return out;
}

double IoUCounts::iou() const {
  if (union_ == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(union_);
}

IoUCounts iou_counts(const PixelMask& pred, const PixelMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw InvalidArgument("iou: mask dimensions differ");
  }
  IoUCounts c;
  simd::kernels().intersection_union(pred.bits().data(), gt.bits().data(), pred.pixel_count(),
                                     &c.intersection, &c.union_);
  return c;
}

double iou(const PixelMask& pred, const PixelMask& gt) { return iou_counts(pred, gt).iou(); }

EvalResult aggregate(std::span<const IoUCounts> counts) {
  EvalResult r;
  r.counts.assign(counts.begin(), counts.end());
  if (counts.empty()) return r;
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  double sum = 0.0;
  std::array<std::size_t, 3> above{};
  for (const IoUCounts& c : counts) {
    const double v = c.iou();
    r.ious.push_back(v);
    sum += v;
    inter += c.intersection;
    uni += c.union_;
    for (std::size_t t = 0; t < kPrecisionThresholds.size(); ++t) {
      if (v > kPrecisionThresholds[t]) ++above[t];
    }
  }
  const auto n = static_cast<double>(counts.size());
  r.miou = sum / n;
  r.oiou = IoUCounts{inter, uni}.iou();
  for (std::size_t t = 0; t < above.size(); ++t) r.p_at[t] = static_cast<double>(above[t]) / n;
  return r;
}

EvalResult evaluate(const model::ModelState& state,
                    std::span<const synth::SampleRecord* const> samples) {
  if (samples.empty()) throw InvalidArgument("evaluate: no samples");
  std::vector<IoUCounts> counts;
  counts.reserve(samples.size());
  for (const synth::SampleRecord* s : samples) {
    const model::PredMask pred = model::predict(state, s->image, s->tokens);
    counts.push_back(iou_counts(binarize(pred), s->gt_mask));
  }
  return aggregate(counts);
}

EvalResult evaluate(const model::ModelState& state, std::span<const synth::SampleRecord> samples) {
  std::vector<const synth::SampleRecord*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return evaluate(state, ptrs);
}

std::vector<synth::SampleRecord> occluded_subset(std::span<const synth::SampleRecord* const> samples,
                                                 double fraction, std::uint64_t seed) {
  const RngStream root(seed, "occlusion-eval");
  std::vector<synth::SampleRecord> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    RngStream rng = root.derive("sample", i);
    synth::OccludeResult r = synth::occlude_eval(*samples[i], fraction, rng);
    if (!r.warning) out.push_back(std::move(r.sample));
  }
  return out;
}

namespace {

EvalResult evaluate_or_empty(const model::ModelState& state,
                             std::span<const synth::SampleRecord* const> samples) {
  if (samples.empty()) return EvalResult{};
  return evaluate(state, samples);
}

}  // namespace

RobustnessReport robustness_report(const model::ModelState& state,
                                   std::span<const synth::SampleRecord* const> val,
                                   std::span<const synth::Corruption> kinds,
                                   const RobustnessOptions& opts) {
  if (val.empty()) throw InvalidArgument("robustness_report: empty validation split");
  const CorruptFn fn = opts.corrupt ? opts.corrupt : CorruptFn(&synth::corrupt);

  RobustnessReport rep;
  rep.clean = evaluate(state, val);

  const RngStream root(opts.seed, "robustness");
  for (synth::Corruption kind : kinds) {
    CorruptionRow row;
    row.kind = kind;
    const RngStream kind_rng = root.derive(synth::corruption_name(kind));
    for (int sev = 1; sev <= kSeverities; ++sev) {
      const RngStream sev_rng = kind_rng.derive("severity", static_cast<std::uint64_t>(sev));
      std::vector<IoUCounts> counts;
      counts.reserve(val.size());
      for (std::size_t i = 0; i < val.size(); ++i) {
        RngStream rng = sev_rng.derive("sample", i);
        const ImageBuffer img = fn(val[i]->image, kind, sev, rng);
        const model::PredMask pred = model::predict(state, img, val[i]->tokens);
        counts.push_back(iou_counts(binarize(pred), val[i]->gt_mask));
      }
      row.severity_oiou[static_cast<std::size_t>(sev - 1)] = aggregate(counts).oiou;
    }
    row.mean_oiou = std::accumulate(row.severity_oiou.begin(), row.severity_oiou.end(), 0.0) /
                    static_cast<double>(kSeverities);
    rep.corruptions.push_back(row);
  }

  const std::vector<synth::SampleRecord> occluded =
      occluded_subset(val, opts.occlusion_fraction, opts.seed);
  std::vector<const synth::SampleRecord*> occ_ptrs;
  for (const auto& s : occluded) occ_ptrs.push_back(&s);
  rep.subsets.push_back({"occlusion", evaluate_or_empty(state, occ_ptrs)});

  for (auto [name, tag] : {std::pair<const char*, std::uint8_t>{"relative_position",
                                                                 synth::kTagRelativePosition},
                           std::pair<const char*, std::uint8_t>{"ordering", synth::kTagOrdering}}) {
    std::vector<const synth::SampleRecord*> subset;
    for (const synth::SampleRecord* s : val) {
      if (s->tags & tag) subset.push_back(s);
    }
    rep.subsets.push_back({name, evaluate_or_empty(state, subset)});
  }
  return rep;
}

}  // namespace maskris::metrics
