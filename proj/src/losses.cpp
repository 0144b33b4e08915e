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

#include "maskris/losses.hpp"

#include <cmath>
#include <string>

#include "maskris/errors.hpp"
#include "maskris/kernels.hpp"

namespace maskris::loss {

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("loss lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
}

LossValue cross_entropy(const model::PredMask& pred, std::span<const double> target,
                        bool full_bce) {
  if (pred.prob.size() != target.size()) {
    throw InvalidArgument("prediction and target sizes differ");
  }
  const std::size_t count = pred.prob.size();
  const auto n = static_cast<double>(count);
  for (double p : pred.prob) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("predicted probability outside (0, 1)");
  }
  const auto& K = simd::kernels();
  std::vector<double> log_p(count);
  K.vlog(pred.prob.data(), log_p.data(), count);
  std::vector<double> log_q;
  if (full_bce) {
    log_q.resize(count);
    for (std::size_t i = 0; i < count; ++i) log_q[i] = 1.0 - pred.prob[i];
    K.vlog(log_q.data(), log_q.data(), count);
  }
  LossValue out;
  out.grad.resize(count);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = pred.prob[i];
    const double t = target[i];
    // Zero-coefficient terms are skipped, which keeps 0 * log(..) out of
    // the sum.
    if (t != 0.0) total -= t * log_p[i];
    if (full_bce) {
      if (t != 1.0) total -= (1.0 - t) * log_q[i];
      out.grad[i] = (p - t) / (n * p * (1.0 - p));
    } else {
      out.grad[i] = -t / (n * p);
    }
  }
  out.value = total / n;
  return out;
}

LossValue bce_loss(const model::PredMask& pred, const PixelMask& target, bool full_bce) {
  if (pred.height != target.height() || pred.width != target.width()) {
    throw InvalidArgument("prediction and mask dimensions differ");
  }
  const auto bits = target.bits();
  std::vector<double> t(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) t[i] = bits[i] ? 1.0 : 0.0;
  return cross_entropy(pred, t, full_bce);
}

LossValue bce_loss(const model::PredMask& pred, const model::PredMask& target, bool full_bce) {
  if (pred.height != target.height || pred.width != target.width) {
    throw InvalidArgument("prediction and target dimensions differ");
  }
  return cross_entropy(pred, target.prob, full_bce);
}

LossValue distill_loss(const model::PredMask& teacher, const model::PredMask& student,
                       bool full_bce) {
  if (teacher.height != student.height || teacher.width != student.width) {
    throw InvalidArgument("teacher and student dimensions differ");
  }
  const std::vector<double> frozen = teacher.prob;
  return cross_entropy(student, frozen, full_bce);
}

TotalLoss total_loss(const LossValue& ce, const LossValue& dist, const LossConfig& cfg) {
  cfg.validate();
  TotalLoss out;
  out.ce_weight = cfg.lambda;
  out.dist_weight = 1.0 - cfg.lambda;
  // The exact-zero cases skip the arithmetic so that lambda = 1 reproduces
  // the supervised-only objective bit for bit.
  if (out.dist_weight == 0.0) {
    out.value = ce.value;
    out.grad_clean = ce.grad;
    out.grad_masked.assign(dist.grad.size(), 0.0);
    return out;
  }
  if (out.ce_weight == 0.0) {
    out.value = dist.value;
    out.grad_clean.assign(ce.grad.size(), 0.0);
    out.grad_masked = dist.grad;
    return out;
  }
  out.value = out.ce_weight * ce.value + out.dist_weight * dist.value;
  out.grad_clean.resize(ce.grad.size());
  for (std::size_t i = 0; i < ce.grad.size(); ++i) out.grad_clean[i] = out.ce_weight * ce.grad[i];
  out.grad_masked.resize(dist.grad.size());
  for (std::size_t i = 0; i < dist.grad.size(); ++i) {
    out.grad_masked[i] = out.dist_weight * dist.grad[i];
  }
  return out;
}

}  // namespace maskris::loss
