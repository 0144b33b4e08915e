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

#include "maskris/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "binio.hpp"
#include "maskris/checkpoint.hpp"
#include "maskris/errors.hpp"
#include "maskris/metrics.hpp"

namespace maskris::train {

Mode parse_mode(std::string_view name) {
  if (name == "baseline") return Mode::kBaseline;
  if (name == "augment") return Mode::kAugment;
  if (name == "maskris") return Mode::kMaskris;
  throw InvalidArgument("unknown training mode '" + std::string(name) + "'");
}

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::kBaseline: return "baseline";
    case Mode::kAugment: return "augment";
    case Mode::kMaskris: return "maskris";
  }
  return "?";
}

Mode TrainConfig::mode() const {
  validate();
  if (dcl_enabled) return Mode::kMaskris;
  if (aug_only_mode) return Mode::kAugment;
  return Mode::kBaseline;
}

void TrainConfig::set_mode(Mode m) {
  dcl_enabled = m == Mode::kMaskris;
  aug_only_mode = m == Mode::kAugment;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (dcl_enabled && aug_only_mode) {
    throw InvalidArgument("dcl_enabled and aug_only_mode are mutually exclusive");
  }
  if (!(lr_base >= 0.0) || !std::isfinite(lr_base)) throw InvalidArgument("lr_base must be >= 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (!(poly_power >= 0.0)) throw InvalidArgument("poly_power must be >= 0");
  if (!(encoder_lr_mult >= 0.0)) throw InvalidArgument("encoder_lr_mult must be >= 0");
  if (!(image_mask.ratio >= 0.0 && image_mask.ratio <= 1.0)) {
    throw InvalidArgument("image_mask.ratio must lie in [0, 1]");
  }
  if (image_mask.patch < 1) throw InvalidArgument("image_mask.patch must be >= 1");
  if (!(aug_prob >= 0.0 && aug_prob <= 1.0)) throw InvalidArgument("aug_prob must lie in [0, 1]");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint_every must be >= 0");
  text_mask.validate();
  loss.validate();
}

model::ModelConfig TrainConfig::model_config(const synth::SceneConfig& scene,
                                             int vocab_size) const {
  model::ModelConfig mc;
  mc.embed_dim = embed_dim;
  mc.fusion_layers = fusion_layers;
  mc.patch_size = patch_size;
  mc.vocab_size = vocab_size;
  mc.image_height = scene.image_height;
  mc.image_width = scene.image_width;
  mc.validate();
  return mc;
}

double poly_lr(std::uint64_t step, std::uint64_t total_steps, double lr_base, double power) {
  if (total_steps == 0 || step > total_steps) {
    throw InvalidArgument("poly_lr: step must lie in [0, total_steps]");
  }
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_base * std::pow(frac, power);
}

void adamw_update(model::ModelState& state, std::span<const double> grads, const AdamWParams& p) {
  const std::size_t n = state.params().size();
  if (grads.size() != n) throw InvalidArgument("adamw_update: gradient size mismatch");
  for (double g : grads) {
    if (!std::isfinite(g)) throw TrainingDiverged("non-finite gradient");
  }
  const std::uint64_t t = state.step() + 1;
  const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
  const std::size_t enc_end = state.layout().encoder_end;
  auto theta = state.mutable_params();
  auto m = state.mutable_first_moment();
  auto v = state.mutable_second_moment();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
    const double lr = i < enc_end ? p.lr * p.encoder_lr_mult : p.lr;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= lr * p.weight_decay * theta[i];
    theta[i] -= lr * mhat / (std::sqrt(vhat) + p.eps);
  }
  state.set_step(t);
  if (!state.all_finite()) throw TrainingDiverged("non-finite parameter after update");
}

MaskedInputs make_masked_inputs(const synth::SampleRecord& sample, const TrainConfig& cfg,
                                int vocab_size, const RngStream& stream) {
  RngStream img_rng = stream.derive("image");
  RngStream txt_rng = stream.derive("text");
  const int h = sample.image.height();
  const int w = sample.image.width();
  const PixelMask pm = masking::sample_pixel_mask(cfg.image_mask.strategy, h, w,
                                                  cfg.image_mask.patch, cfg.image_mask.ratio,
                                                  img_rng);
  MaskedInputs out;
  out.image = masking::apply_image_mask(sample.image, pm);
  out.tokens = masking::mask_tokens(sample.tokens, cfg.text_mask, vocab_size, txt_rng).tokens;
  return out;
}

namespace {

RngStream sample_stream(const TrainConfig& cfg, int epoch, std::uint64_t index) {
  return RngStream(cfg.seed, "train-mask")
      .derive("epoch", static_cast<std::uint64_t>(epoch))
      .derive("sample", index);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainingDiverged(std::string("non-finite ") + what);
}

// Running mean of a per-sample quantity that may be absent for some samples.
struct MeanAcc {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::optional<double> get() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace

GradResult compute_gradients(const model::ModelState& state, std::span<const BatchItem> batch,
                             const TrainConfig& cfg, int vocab_size, int epoch) {
  if (batch.empty()) throw InvalidArgument("train_step: empty batch");
  const Mode mode = cfg.mode();
  const bool full = cfg.loss.full_bce;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  GradResult out;
  out.grads.assign(state.params().size(), 0.0);
  MeanAcc ce_clean, ce_masked, dist_acc, total;

  for (const BatchItem& item : batch) {
    const synth::SampleRecord& s = *item.sample;
    const RngStream stream = sample_stream(cfg, epoch, item.index);

    if (mode == Mode::kBaseline) {
      const model::ForwardResult f = model::forward(state, s.image, s.tokens);
      const loss::LossValue ce = loss::bce_loss(f.pred, s.gt_mask, full);
      check_finite(ce.value, "loss");
      model::backward_accumulate(f.cache, ce.grad, inv_b, out.grads);
      ce_clean.add(ce.value);
      total.add(ce.value);
      continue;
    }

    if (mode == Mode::kAugment) {
      RngStream coin = stream.derive("coin");
      const bool masked = coin.bernoulli(cfg.aug_prob);
      model::ForwardResult f;
      if (masked) {
        const MaskedInputs mi = make_masked_inputs(s, cfg, vocab_size, stream);
        f = model::forward(state, mi.image, mi.tokens);
      } else {
        f = model::forward(state, s.image, s.tokens);
      }
      const loss::LossValue ce = loss::bce_loss(f.pred, s.gt_mask, full);
      check_finite(ce.value, "loss");
      model::backward_accumulate(f.cache, ce.grad, inv_b, out.grads);
      (masked ? ce_masked : ce_clean).add(ce.value);
      total.add(ce.value);
      continue;
    }

    // Dual path. The teacher prediction enters the distillation loss only
    // as copied constants, so the clean cache receives the supervised
    // gradient alone.
    const model::ForwardResult clean = model::forward(state, s.image, s.tokens);
    const MaskedInputs mi = make_masked_inputs(s, cfg, vocab_size, stream);
    const model::ForwardResult student = model::forward(state, mi.image, mi.tokens);
    const loss::LossValue ce = loss::bce_loss(clean.pred, s.gt_mask, full);
    const loss::LossValue dist = loss::distill_loss(clean.pred, student.pred, full);
    const loss::TotalLoss tl = loss::total_loss(ce, dist, cfg.loss);
    check_finite(tl.value, "loss");
    // A zero-weight path is skipped outright: accumulating its zeros could
    // still flip the sign of zero gradients and break bit equality with the
    // single-path objective.
    if (tl.ce_weight != 0.0) model::backward_accumulate(clean.cache, tl.grad_clean, inv_b, out.grads);
    if (tl.dist_weight != 0.0) {
      model::backward_accumulate(student.cache, tl.grad_masked, inv_b, out.grads);
    }
    ce_clean.add(ce.value);
    ce_masked.add(loss::bce_loss(student.pred, s.gt_mask, full).value);
    dist_acc.add(dist.value);
    total.add(tl.value);
  }

  out.stats.loss_ce_clean = ce_clean.get();
  out.stats.loss_masked = ce_masked.get();
  out.stats.loss_dist = dist_acc.get();
  out.stats.loss_total = *total.get();
  return out;
}

StepStats train_step(model::ModelState& state, std::span<const BatchItem> batch,
                     const TrainConfig& cfg, int vocab_size, int epoch, std::uint64_t step,
                     std::uint64_t total_steps) {
  GradResult g = compute_gradients(state, batch, cfg, vocab_size, epoch);
  AdamWParams p;
  p.lr = poly_lr(step, total_steps, cfg.lr_base, cfg.poly_power);
  p.weight_decay = cfg.weight_decay;
  p.encoder_lr_mult = cfg.encoder_lr_mult;
  adamw_update(state, g.grads, p);
  return g.stats;
}

namespace {

void put(std::string& out, const std::optional<double>& v) {
  if (v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    out += buf;
  }
}

}  // namespace

std::string stats_csv(const TrainStats& stats) {
  std::string out = "# version=1\nstep,epoch,loss_ce_clean,loss_masked,loss_dist,lr,val_miou,val_oiou\n";
  for (const StatsRow& r : stats.rows) {
    out += std::to_string(r.step) + "," + std::to_string(r.epoch) + ",";
    put(out, r.loss_ce_clean);
    out += ",";
    put(out, r.loss_masked);
    out += ",";
    put(out, r.loss_dist);
    out += ",";
    put(out, r.lr);
    out += ",";
    put(out, r.val_miou);
    out += ",";
    put(out, r.val_oiou);
    out += "\n";
  }
  return out;
}

ValLosses validate_model(const model::ModelState& state,
                         std::span<const synth::SampleRecord* const> val, const TrainConfig& cfg,
                         int vocab_size) {
  if (val.empty()) throw InvalidArgument("validation split is empty");
  const RngStream root(cfg.seed, "val-mask");
  std::vector<metrics::IoUCounts> counts;
  counts.reserve(val.size());
  double clean_sum = 0.0;
  double masked_sum = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const synth::SampleRecord& s = *val[i];
    const model::PredMask pred = model::predict(state, s.image, s.tokens);
    counts.push_back(metrics::iou_counts(metrics::binarize(pred), s.gt_mask));
    clean_sum += loss::bce_loss(pred, s.gt_mask, cfg.loss.full_bce).value;
    const MaskedInputs mi = make_masked_inputs(s, cfg, vocab_size, root.derive("sample", i));
    const model::PredMask mpred = model::predict(state, mi.image, mi.tokens);
    masked_sum += loss::bce_loss(mpred, s.gt_mask, cfg.loss.full_bce).value;
  }
  const metrics::EvalResult ev = metrics::aggregate(counts);
  ValLosses out;
  out.miou = ev.miou;
  out.oiou = ev.oiou;
  out.loss_clean = clean_sum / static_cast<double>(val.size());
  out.loss_masked = masked_sum / static_cast<double>(val.size());
  return out;
}

TrainResult train(const TrainConfig& cfg, const synth::Dataset& dataset,
                  const std::string& out_dir, const ProgressFn& progress) {
  cfg.validate();
  const std::vector<const synth::SampleRecord*> train_set = dataset.split(synth::Split::kTrain);
  const std::vector<const synth::SampleRecord*> val_set = dataset.split(synth::Split::kVal);
  if (train_set.empty() || val_set.empty()) {
    throw InvalidArgument("dataset needs both train and val samples");
  }
  const int vocab_size = dataset.vocab.size();
  const model::ModelConfig mc = cfg.model_config(dataset.config, vocab_size);
  RngStream init_rng(cfg.seed, "model");

  TrainResult res{model::init_params(mc, init_rng), {}};
  model::ModelState& state = res.state;

  const std::size_t n = train_set.size();
  const auto bsz = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + bsz - 1) / bsz;
  const std::uint64_t total_steps = static_cast<std::uint64_t>(cfg.epochs) * steps_per_epoch;

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  const RngStream shuffle_root(cfg.seed, "shuffle");
  std::vector<std::size_t> order(n);
  std::vector<BatchItem> batch;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng = shuffle_root.derive("epoch", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t b = 0; b < n; b += bsz) {
      batch.clear();
      for (std::size_t k = b; k < std::min(n, b + bsz); ++k) {
        batch.push_back({train_set[order[k]], order[k]});
      }
      const double lr = poly_lr(step, total_steps, cfg.lr_base, cfg.poly_power);
      const StepStats st = train_step(state, batch, cfg, vocab_size, epoch, step, total_steps);
      StatsRow row;
      row.step = step;
      row.epoch = epoch;
      row.loss_ce_clean = st.loss_ce_clean;
      row.loss_masked = st.loss_masked;
      row.loss_dist = st.loss_dist;
      row.lr = lr;
      res.stats.rows.push_back(row);
      if (progress) progress(row);
      ++step;
    }
    // Validation rows carry the validation losses in the loss columns and
    // leave lr empty.
    const ValLosses vl = validate_model(state, val_set, cfg, vocab_size);
    StatsRow vrow;
    vrow.step = step;
    vrow.epoch = epoch;
    vrow.loss_ce_clean = vl.loss_clean;
    vrow.loss_masked = vl.loss_masked;
    vrow.val_miou = vl.miou;
    vrow.val_oiou = vl.oiou;
    res.stats.rows.push_back(vrow);
    if (progress) progress(vrow);

    if (!out_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      io::save_checkpoint(out_dir + "/checkpoint_epoch" + std::to_string(epoch + 1) + ".bin",
                          state);
    }
  }

  if (!out_dir.empty()) {
    io::save_checkpoint(out_dir + "/checkpoint.bin", state);
    binio::write_text_atomic(out_dir + "/stats.csv", stats_csv(res.stats));
  }
  return res;
}

}  // namespace maskris::train
