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

// Pixel-wise cross-entropy, stop-gradient distillation, and their
// lambda-weighted total.

#include <span>
#include <vector>

#include "maskris/model.hpp"
#include "maskris/types.hpp"

namespace maskris::loss {

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  // d value / d prediction, per pixel
};

struct LossConfig {
  // Weight on the supervised term; 1 - lambda weights distillation.
  double lambda = 0.5;
  // Two-term binary cross-entropy; false selects the one-term
  // -mean(y log p) form.
  bool full_bce = true;

  void validate() const;
};

// Cross-entropy of `pred` against soft or hard targets in [0, 1].
LossValue cross_entropy(const model::PredMask& pred, std::span<const double> target, bool full_bce);

LossValue bce_loss(const model::PredMask& pred, const PixelMask& target, bool full_bce);
LossValue bce_loss(const model::PredMask& pred, const model::PredMask& target, bool full_bce);

// The teacher's probabilities are copied in as constants; nothing in the
// result refers back to the teacher, so no gradient can reach it.
LossValue distill_loss(const model::PredMask& teacher, const model::PredMask& student,
                       bool full_bce);

struct TotalLoss {
  double value = 0.0;
  double ce_weight = 0.0;
  double dist_weight = 0.0;
  std::vector<double> grad_clean;   // weighted gradient for the clean prediction
  std::vector<double> grad_masked;  // weighted gradient for the masked prediction
};

// value = lambda * ce + (1 - lambda) * dist.
TotalLoss total_loss(const LossValue& ce, const LossValue& dist, const LossConfig& cfg);

}  // namespace maskris::loss
