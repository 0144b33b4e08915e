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

// Dual-path training. In maskris mode every sample is run twice: the clean
// (image, expression) pair with the supervised loss, and a masked copy whose
// prediction is pulled toward the clean prediction held constant. Gradients
// of both paths are summed, averaged over the batch, and applied in one
// AdamW step with a polynomial learning-rate decay.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskris/losses.hpp"
#include "maskris/masking.hpp"
#include "maskris/model.hpp"
#include "maskris/synthdata.hpp"

namespace maskris::train {

enum class Mode { kBaseline, kAugment, kMaskris };

Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode m);

struct ImageMaskConfig {
  masking::Strategy strategy = masking::Strategy::kPatch;
  double ratio = 0.75;
  int patch = 8;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr_base = 1e-3;
  double weight_decay = 0.01;
  double poly_power = 0.9;
  // Learning-rate multiplier for the patch and word encoders.
  double encoder_lr_mult = 1.0;
  ImageMaskConfig image_mask;
  masking::TextMaskConfig text_mask;
  loss::LossConfig loss;
  std::uint64_t seed = 0;
  bool dcl_enabled = true;
  bool aug_only_mode = false;
  // Per-sample probability of masking in augment mode.
  double aug_prob = 0.5;
  int embed_dim = 16;
  int fusion_layers = 2;
  int patch_size = 8;
  // Also write checkpoint_epoch<N>.bin every this many epochs; 0 disables.
  int checkpoint_every = 0;

  Mode mode() const;
  void set_mode(Mode m);
  void validate() const;
  model::ModelConfig model_config(const synth::SceneConfig& scene, int vocab_size) const;
};

// lr_base * (1 - step / total_steps)^power.
double poly_lr(std::uint64_t step, std::uint64_t total_steps, double lr_base, double power);

struct AdamWParams {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double encoder_lr_mult = 1.0;
};

// Decoupled weight decay with bias-corrected moments. Throws
// TrainingDiverged on a non-finite gradient before touching the state.
void adamw_update(model::ModelState& state, std::span<const double> grads, const AdamWParams& p);

struct BatchItem {
  const synth::SampleRecord* sample = nullptr;
  std::uint64_t index = 0;  // position in the training split
};

// Masked view of one sample for (epoch, index), drawn from labelled
// sub-streams of the training seed.
struct MaskedInputs {
  ImageBuffer image;
  TokenSequence tokens;
};
MaskedInputs make_masked_inputs(const synth::SampleRecord& sample, const TrainConfig& cfg,
                                int vocab_size, const RngStream& stream);

struct StepStats {
  std::optional<double> loss_ce_clean;
  std::optional<double> loss_masked;
  std::optional<double> loss_dist;
  double loss_total = 0.0;
};

struct GradResult {
  model::ParamGrads grads;
  StepStats stats;
};

// Batch-mean parameter gradient of the configured objective.
GradResult compute_gradients(const model::ModelState& state, std::span<const BatchItem> batch,
                             const TrainConfig& cfg, int vocab_size, int epoch);

StepStats train_step(model::ModelState& state, std::span<const BatchItem> batch,
                     const TrainConfig& cfg, int vocab_size, int epoch, std::uint64_t step,
                     std::uint64_t total_steps);

struct StatsRow {
  std::uint64_t step = 0;
  int epoch = 0;
  std::optional<double> loss_ce_clean;
  std::optional<double> loss_masked;
  std::optional<double> loss_dist;
  std::optional<double> lr;
  std::optional<double> val_miou;
  std::optional<double> val_oiou;
};

struct TrainStats {
  std::vector<StatsRow> rows;
};

std::string stats_csv(const TrainStats& stats);

struct ValLosses {
  double loss_clean = 0.0;
  double loss_masked = 0.0;
  double miou = 0.0;
  double oiou = 0.0;
};

// Validation metrics plus mean cross-entropy on clean and on masked inputs.
// The masked inputs depend only on cfg.seed and the sample position.
ValLosses validate_model(const model::ModelState& state,
                         std::span<const synth::SampleRecord* const> val, const TrainConfig& cfg,
                         int vocab_size);

struct TrainResult {
  model::ModelState state;
  TrainStats stats;
};

using ProgressFn = std::function<void(const StatsRow&)>;

// Runs epochs * ceil(n / batch_size) steps. When out_dir is non-empty writes
// checkpoint.bin and stats.csv there (plus periodic checkpoints).
TrainResult train(const TrainConfig& cfg, const synth::Dataset& dataset,
                  const std::string& out_dir = "", const ProgressFn& progress = {});

}  // namespace maskris::train
