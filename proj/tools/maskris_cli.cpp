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

// maskris: command-line entry point.
//
//   gen           synthetic dataset
//   train         baseline | augment | maskris
//   eval          clean metrics, optional robustness report
//   sweep         one-parameter ablation over several seeds
//   mask-preview  PGM previews of a sampled image mask
//   mask-prob     exact and Monte-Carlo full-mask probabilities
//   replay        rerun a command from its manifest
//
// Exit codes: 0 success, 1 I/O or other failure, 2 usage, 3 divergence,
// 4 corrupt artifact.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "binio.hpp"
#include "maskris/checkpoint.hpp"
#include "maskris/config.hpp"
#include "maskris/dataset_io.hpp"
#include "maskris/errors.hpp"
#include "maskris/masking.hpp"
#include "maskris/metrics.hpp"
#include "maskris/pgm.hpp"
#include "maskris/report.hpp"
#include "maskris/synthdata.hpp"
#include "maskris/trainer.hpp"

#ifndef MASKRIS_VERSION
#define MASKRIS_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace maskris;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCorrupt = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const std::string& path) {
  const auto bytes = binio::read_file(path);
  return hex64(binio::checksum(bytes.data(), bytes.size()));
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

// Key-value record of one invocation. Written once before the work starts
// and again, with the wall-clock time, when it finishes.
class Manifest {
 public:
  Manifest(std::string path, const std::vector<std::string>& argv)
      : path_(std::move(path)), start_(std::chrono::steady_clock::now()) {
    kv_["command"] = argv.empty() ? "" : argv.front();
    kv_["argv.count"] = std::to_string(argv.size());
    for (std::size_t i = 0; i < argv.size(); ++i) kv_["argv." + pad(i)] = argv[i];
    kv_["code_version"] = MASKRIS_VERSION;
    kv_["started_at"] = utc_now();
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void set_config(const config::KeyValues& kv) {
    for (const auto& [k, v] : kv) {
      if (k != "version") kv_["config." + k] = v;
    }
  }
  void input(const std::string& name, const std::string& path) {
    kv_["input." + name + ".path"] = path;
    kv_["input." + name + ".fnv1a"] = file_digest(path);
  }
  void artifact(const std::string& name, const std::string& path) {
    kv_["artifact." + name] = path;
  }

  void begin() {
    kv_["status"] = "started";
    write();
  }
  void finish() {
    kv_["status"] = "complete";
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", secs);
    kv_["wall_clock_seconds"] = buf;
    write();
  }

  static std::string pad(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return buf;
  }

 private:
  void write() {
    ensure_parent(path_);
    binio::write_text_atomic(path_, "# maskris run manifest\n" + config::format(kv_));
  }

  std::string path_;
  std::chrono::steady_clock::time_point start_;
  config::KeyValues kv_;
};

// Set by replay: the config snapshot of the original run, used in place of
// any --config file and config-changing flags.
struct Context {
  std::optional<config::KeyValues> snapshot;
};

template <typename Fn>
auto load_config(const std::string& path, Fn fn) {
  try {
    return fn(path);
  } catch (const FormatError& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
}

synth::Dataset load_dataset(const std::string& path) {
  if (!fs::exists(path)) throw IoError("dataset not found: " + path);
  return io::read_dataset(path);
}

// ---------------------------------------------------------------- gen

struct GenOpts {
  std::uint64_t seed = 0;
  int count = 1000;
  std::string out;
  std::string config;
};

int cmd_gen(const GenOpts& o, const std::vector<std::string>& argv, const Context& ctx) {
  if (o.count <= 0) throw UsageError("--count must be positive");
  synth::SceneConfig scene;
  if (ctx.snapshot) {
    scene = config::scene_config_from(*ctx.snapshot);
  } else if (!o.config.empty()) {
    scene = load_config(o.config, config::load_scene_config);
  }
  scene.validate();

  Manifest m(o.out + ".manifest", argv);
  m.set("seed", std::to_string(o.seed));
  m.set("count", std::to_string(o.count));
  m.set_config(config::to_key_values(scene));
  m.artifact("dataset", o.out);
  m.begin();

  const synth::Dataset ds = synth::generate_dataset(o.seed, o.count, scene);
  ensure_parent(o.out);
  io::write_dataset(o.out, ds);

  std::size_t train = 0, val = 0, occ = 0, pos = 0, ord = 0;
  for (const auto& s : ds.samples) {
    (s.split == synth::Split::kVal ? val : train)++;
    if (s.tags & synth::kTagOcclusion) ++occ;
    if (s.tags & synth::kTagRelativePosition) ++pos;
    if (s.tags & synth::kTagOrdering) ++ord;
  }
  m.finish();
  std::cout << "samples=" << ds.samples.size() << " train=" << train << " val=" << val
            << " occlusion=" << occ << " relative_position=" << pos << " ordering=" << ord
            << " fnv1a=" << file_digest(o.out) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string mode = "maskris";
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool quiet = false;
};

train::TrainConfig resolve_train_config(const std::string& config_path,
                                        const std::optional<std::uint64_t>& seed,
                                        const std::optional<int>& epochs, const Context& ctx) {
  if (ctx.snapshot) return config::train_config_from(*ctx.snapshot);
  train::TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path, config::load_train_config);
  if (seed) cfg.seed = *seed;
  if (epochs) cfg.epochs = *epochs;
  return cfg;
}

int cmd_train(const TrainOpts& o, const std::vector<std::string>& argv, const Context& ctx) {
  train::TrainConfig cfg = resolve_train_config(o.config, o.seed, o.epochs, ctx);
  if (!ctx.snapshot) cfg.set_mode(train::parse_mode(o.mode));
  cfg.validate();
  const synth::Dataset ds = load_dataset(o.data);

  ensure_dir(o.out);
  Manifest m(o.out + "/manifest.txt", argv);
  m.set("mode", std::string(train::mode_name(cfg.mode())));
  m.set("seed", std::to_string(cfg.seed));
  m.set_config(config::to_key_values(cfg));
  m.input("data", o.data);
  m.artifact("checkpoint", o.out + "/checkpoint.bin");
  m.artifact("stats", o.out + "/stats.csv");
  m.begin();

  const train::ProgressFn progress = [&](const train::StatsRow& row) {
    if (o.quiet || !row.val_miou) return;
    std::fprintf(stderr, "epoch %d/%d val_miou=%.4f val_oiou=%.4f\n", row.epoch + 1, cfg.epochs,
                 *row.val_miou, *row.val_oiou);
  };
  const train::TrainResult res = train::train(cfg, ds, o.out, progress);
  m.finish();

  const train::StatsRow* last = nullptr;
  for (const auto& r : res.stats.rows) {
    if (r.val_miou) last = &r;
  }
  std::cout << "mode=" << train::mode_name(cfg.mode()) << " seed=" << cfg.seed
            << " steps=" << res.state.step();
  if (last) {
    std::cout << " miou=" << report::fmt(*last->val_miou, 6)
              << " oiou=" << report::fmt(*last->val_oiou, 6)
              << " val_loss=" << report::fmt(last->loss_ce_clean.value_or(NAN), 6)
              << " val_masked_loss=" << report::fmt(last->loss_masked.value_or(NAN), 6);
  }
  std::cout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string split = "val";
  bool robustness = false;
  std::uint64_t seed = 0;
  double occlusion_fraction = 0.5;
};

std::vector<const synth::SampleRecord*> select_split(const synth::Dataset& ds,
                                                     const std::string& split) {
  if (split == "val") return ds.split(synth::Split::kVal);
  if (split == "train") return ds.split(synth::Split::kTrain);
  if (split == "all") {
    std::vector<const synth::SampleRecord*> all;
    for (const auto& s : ds.samples) all.push_back(&s);
    return all;
  }
  throw UsageError("--split must be val, train or all");
}

int cmd_eval(const EvalOpts& o, const std::vector<std::string>& argv, const Context&) {
  const auto samples_check = std::vector<std::string>{"val", "train", "all"};
  if (std::find(samples_check.begin(), samples_check.end(), o.split) == samples_check.end()) {
    throw UsageError("--split must be val, train or all");
  }
  if (!fs::exists(o.ckpt)) throw IoError("checkpoint not found: " + o.ckpt);
  const model::ModelState state = io::load_checkpoint(o.ckpt);
  const synth::Dataset ds = load_dataset(o.data);
  const auto samples = select_split(ds, o.split);
  if (samples.empty()) throw UsageError("split '" + o.split + "' is empty");

  ensure_dir(o.out);
  Manifest m(o.out + "/manifest.txt", argv);
  m.set("seed", std::to_string(o.seed));
  m.input("checkpoint", o.ckpt);
  m.input("data", o.data);
  m.artifact("eval", o.out + "/eval.csv");
  if (o.robustness) {
    m.artifact("robustness", o.out + "/robustness.csv");
    m.artifact("robustness_long", o.out + "/robustness_long.csv");
  }
  m.begin();

  const metrics::EvalResult clean = metrics::evaluate(state, samples);
  binio::write_text_atomic(o.out + "/eval.csv", report::eval_csv(clean));
  std::cout << report::eval_text(clean);
  if (o.robustness) {
    metrics::RobustnessOptions ro;
    ro.seed = o.seed;
    ro.occlusion_fraction = o.occlusion_fraction;
    const metrics::RobustnessReport rep =
        metrics::robustness_report(state, samples, synth::kAllCorruptions, ro);
    binio::write_text_atomic(o.out + "/robustness.csv", report::robustness_csv(rep));
    binio::write_text_atomic(o.out + "/robustness_long.csv", report::robustness_long_csv(rep));
    std::cout << report::robustness_text(rep);
  }
  m.finish();
  std::cout << "split=" << o.split << " samples=" << clean.size()
            << " miou=" << report::fmt(clean.miou, 6) << " oiou=" << report::fmt(clean.oiou, 6)
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepOpts {
  std::string param;
  std::vector<std::string> values;
  std::string data;
  std::string out;
  std::string config;
  std::string mode = "maskris";
  int seeds = 3;
  std::uint64_t seed = 0;
  std::optional<int> epochs;
  int jobs = 1;
};

struct SweepPoint {
  std::string label;
  double order = 0.0;
  train::TrainConfig cfg;
};

std::vector<SweepPoint> sweep_points(const SweepOpts& o, const train::TrainConfig& base) {
  static const std::vector<std::string> kParams = {"ratio", "patch", "lambda", "strategy"};
  if (std::find(kParams.begin(), kParams.end(), o.param) == kParams.end()) {
    throw UsageError("--param must be one of ratio, patch, lambda, strategy");
  }
  if (o.values.empty()) throw UsageError("--values is empty");
  std::vector<SweepPoint> pts;
  for (std::size_t i = 0; i < o.values.size(); ++i) {
    const std::string& v = o.values[i];
    SweepPoint p{v, static_cast<double>(i), base};
    if (o.param == "strategy") {
      p.cfg.image_mask.strategy = masking::parse_strategy(v);
    } else {
      double d = 0.0;
      try {
        std::size_t used = 0;
        d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw UsageError("--values: not a number: '" + v + "'");
      }
      p.order = d;
      if (o.param == "ratio") p.cfg.image_mask.ratio = d;
      if (o.param == "lambda") p.cfg.loss.lambda = d;
      if (o.param == "patch") {
        if (d != std::floor(d)) throw UsageError("--values: patch sizes must be integers");
        p.cfg.image_mask.patch = static_cast<int>(d);
      }
    }
    try {
      p.cfg.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError("--values '" + v + "': " + e.what());
    }
    pts.push_back(std::move(p));
  }
  if (o.param != "strategy") {
    std::stable_sort(pts.begin(), pts.end(),
                     [](const SweepPoint& a, const SweepPoint& b) { return a.order < b.order; });
  }
  return pts;
}

struct RunOutcome {
  double miou = 0.0;
  double oiou = 0.0;
};

RunOutcome run_once(const train::TrainConfig& cfg, const synth::Dataset& ds) {
  const train::TrainResult res = train::train(cfg, ds);
  RunOutcome out;
  for (const auto& r : res.stats.rows) {
    if (r.val_miou) out = {*r.val_miou, *r.val_oiou};
  }
  return out;
}

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

int cmd_sweep(const SweepOpts& o, const std::vector<std::string>& argv, const Context& ctx) {
  if (o.seeds < 1) throw UsageError("--seeds must be at least 1");
  if (o.jobs < 1) throw UsageError("--jobs must be at least 1");
  train::TrainConfig base = resolve_train_config(o.config, std::nullopt, o.epochs, ctx);
  if (!ctx.snapshot) base.set_mode(train::parse_mode(o.mode));
  const std::vector<SweepPoint> pts = sweep_points(o, base);
  const synth::Dataset ds = load_dataset(o.data);

  ensure_dir(o.out);
  Manifest m(o.out + "/manifest.txt", argv);
  m.set("seed", std::to_string(o.seed));
  m.set("seeds", std::to_string(o.seeds));
  m.set_config(config::to_key_values(base));
  m.input("data", o.data);
  m.artifact("sweep", o.out + "/sweep.csv");
  m.artifact("runs", o.out + "/sweep_runs.csv");
  m.begin();

  // Every (value, seed) run is independent; results land in fixed slots so
  // the parallel schedule cannot change the output.
  const std::size_t n_runs = pts.size() * static_cast<std::size_t>(o.seeds);
  std::vector<RunOutcome> results(n_runs);
  auto config_for = [&](std::size_t k) {
    train::TrainConfig cfg = pts[k / o.seeds].cfg;
    cfg.seed = o.seed + k % o.seeds;
    return cfg;
  };
  if (o.jobs == 1) {
    for (std::size_t k = 0; k < n_runs; ++k) {
      results[k] = run_once(config_for(k), ds);
      std::fprintf(stderr, "run %zu/%zu done\n", k + 1, n_runs);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> workers;
    for (int j = 0; j < o.jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t k = next++; k < n_runs; k = next++) {
          try {
            results[k] = run_once(config_for(k), ds);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::ostringstream runs, summary;
  runs << "# version=" << report::kReportVersion << "\nparam,value,seed,val_miou,val_oiou\n";
  summary << "# version=" << report::kReportVersion
          << "\nparam,value,seeds,val_miou_mean,val_miou_sd,val_oiou_mean,val_oiou_sd\n";
  std::vector<std::vector<std::string>> table = {{o.param, "val mIoU", "val oIoU"}};
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::vector<double> mi, oi;
    for (int s = 0; s < o.seeds; ++s) {
      const RunOutcome& r = results[p * o.seeds + s];
      mi.push_back(r.miou);
      oi.push_back(r.oiou);
      runs << o.param << "," << pts[p].label << "," << (o.seed + s) << ","
           << config::format_double(r.miou) << "," << config::format_double(r.oiou) << "\n";
    }
    const auto [mm, ms] = mean_sd(mi);
    const auto [om, os] = mean_sd(oi);
    summary << o.param << "," << pts[p].label << "," << o.seeds << ","
            << config::format_double(mm) << "," << config::format_double(ms) << ","
            << config::format_double(om) << "," << config::format_double(os) << "\n";
    table.push_back({pts[p].label, report::fmt(100 * mm, 2) + " ± " + report::fmt(100 * ms, 2),
                     report::fmt(100 * om, 2) + " ± " + report::fmt(100 * os, 2)});
  }
  binio::write_text_atomic(o.out + "/sweep_runs.csv", runs.str());
  binio::write_text_atomic(o.out + "/sweep.csv", summary.str());
  m.finish();
  std::cout << report::aligned_table(table);
  return kExitOk;
}

// ---------------------------------------------------------------- mask-preview

struct PreviewOpts {
  std::string data;
  long long index = 0;
  std::string strategy = "patch";
  double ratio = 0.75;
  int patch = 8;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_mask_preview(const PreviewOpts& o, const std::vector<std::string>& argv, const Context&) {
  const masking::Strategy strategy = masking::parse_strategy(o.strategy);
  const synth::Dataset ds = load_dataset(o.data);
  if (o.index < 0 || o.index >= static_cast<long long>(ds.samples.size())) {
    throw UsageError("--image-from-data " + std::to_string(o.index) + " is out of range (dataset has " +
                     std::to_string(ds.samples.size()) + " samples)");
  }
  const synth::SampleRecord& s = ds.samples[static_cast<std::size_t>(o.index)];

  ensure_dir(o.out);
  Manifest m(o.out + "/manifest.txt", argv);
  m.set("seed", std::to_string(o.seed));
  m.input("data", o.data);
  for (const char* name : {"original", "mask", "masked"}) {
    m.artifact(name, o.out + "/" + name + ".pgm");
  }
  m.begin();

  RngStream rng = RngStream(o.seed, "mask-preview").derive("sample", static_cast<std::uint64_t>(o.index));
  const PixelMask mask = masking::sample_pixel_mask(strategy, s.image.height(), s.image.width(),
                                                    o.patch, o.ratio, rng);
  const ImageBuffer masked = masking::apply_image_mask(s.image, mask);
  io::write_pgm(o.out + "/original.pgm", io::to_gray(s.image));
  io::write_pgm(o.out + "/mask.pgm", io::to_gray(mask));
  io::write_pgm(o.out + "/masked.pgm", io::to_gray(masked));
  m.finish();

  std::cout << "sample=" << o.index << " strategy=" << masking::strategy_name(strategy)
            << " masked_pixels=" << mask.count() << "/" << mask.pixel_count()
            << " masked_fraction=" << report::fmt(static_cast<double>(mask.count()) /
                                                      static_cast<double>(mask.pixel_count()), 6)
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- mask-prob

struct ProbOpts {
  int cells = 196;
  int masked = 147;
  int object_cells = 1;
  long long draws = 0;
  std::uint64_t seed = 0;
};

int cmd_mask_prob(const ProbOpts& o) {
  const double exact = masking::exact_full_mask_prob(o.cells, o.masked, o.object_cells);
  std::cout << "cells=" << o.cells << " masked=" << o.masked << " object_cells=" << o.object_cells
            << " exact=" << config::format_double(exact);
  if (o.draws > 0) {
    RngStream rng(o.seed, "mask-prob");
    const auto mc = masking::mc_full_mask_prob(o.cells, o.masked, o.object_cells, o.draws, rng);
    std::cout << " mc=" << config::format_double(mc.estimate)
              << " mc_se=" << config::format_double(mc.std_error);
  }
  std::cout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- dispatch

int run(std::vector<std::string> args, const Context& ctx);

struct ReplayOpts {
  std::string manifest;
  std::string out;
};

int cmd_replay(const ReplayOpts& o, const Context& ctx) {
  if (ctx.snapshot) throw UsageError("replay cannot replay a replay");
  const config::KeyValues kv = [&] {
    try {
      return config::parse([&] {
        const auto bytes = binio::read_file(o.manifest);
        return std::string(bytes.begin(), bytes.end());
      }());
    } catch (const FormatError& e) {
      throw FormatError("manifest " + o.manifest + ": " + e.what());
    }
  }();
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("manifest " + o.manifest + ": missing key " + k);
    return it->second;
  };
  if (get("status") != "complete") throw FormatError("manifest records an incomplete run");

  std::vector<std::string> args;
  const int n = std::stoi(get("argv.count"));
  for (int i = 0; i < n; ++i) args.push_back(get("argv." + Manifest::pad(static_cast<std::size_t>(i))));
  if (args.empty() || args.front() == "replay") throw FormatError("manifest has no replayable command");
  if (get("code_version") != MASKRIS_VERSION) {
    std::fprintf(stderr, "warning: manifest written by version %s, running %s\n",
                 get("code_version").c_str(), MASKRIS_VERSION);
  }

  // Inputs must be the bytes the original run saw.
  for (const auto& [k, v] : kv) {
    const std::string suffix = ".fnv1a";
    if (k.rfind("input.", 0) != 0 || k.size() < suffix.size() ||
        k.compare(k.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    const std::string path = get(k.substr(0, k.size() - suffix.size()) + ".path");
    if (!fs::exists(path)) throw IoError("replay input missing: " + path);
    if (file_digest(path) != v) throw FormatError("replay input changed since the run: " + path);
  }

  if (!o.out.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--out") {
        args[i + 1] = o.out;
        replaced = true;
      } else if (args[i].rfind("--out=", 0) == 0) {
        args[i] = "--out=" + o.out;
        replaced = true;
      }
    }
    if (!replaced && args.size() >= 2 && args.back().rfind("--out=", 0) == 0) {
      args.back() = "--out=" + o.out;
      replaced = true;
    }
    if (!replaced) throw UsageError("recorded command has no --out to redirect");
  }

  Context replay_ctx;
  config::KeyValues snap;
  for (const auto& [k, v] : kv) {
    if (k.rfind("config.", 0) == 0) snap[k.substr(7)] = v;
  }
  if (!snap.empty()) replay_ctx.snapshot = snap;
  return run(args, replay_ctx);
}

int run(std::vector<std::string> args, const Context& ctx) {
  CLI::App app{"maskris: masked-input training lab for referring segmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MASKRIS_VERSION);

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
  g->add_option("--seed", gen.seed, "Dataset seed");
  g->add_option("--count", gen.count, "Number of samples")->capture_default_str();
  g->add_option("--out", gen.out, "Dataset file to write")->required();
  g->add_option("--config", gen.config, "Scene config file");

  TrainOpts tr;
  std::uint64_t tr_seed = 0;
  int tr_epochs = 0;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--mode", tr.mode, "baseline, augment or maskris")
      ->check(CLI::IsMember({"baseline", "augment", "maskris"}))
      ->capture_default_str();
  t->add_option("--config", tr.config, "Train config file");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--out", tr.out, "Run directory")->required();
  auto* t_seed = t->add_option("--seed", tr_seed, "Override the config seed");
  auto* t_epochs = t->add_option("--epochs", tr_epochs, "Override the config epochs");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset file")->required();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--split", ev.split, "val, train or all")->capture_default_str();
  e->add_flag("--robustness", ev.robustness, "Add corruption and subset rows");
  e->add_option("--seed", ev.seed, "Corruption and occlusion seed");
  e->add_option("--occlusion-fraction", ev.occlusion_fraction)->capture_default_str();

  SweepOpts sw;
  int sw_epochs = 0;
  auto* s = app.add_subcommand("sweep", "Ablate one parameter over several seeds");
  s->add_option("--param", sw.param, "ratio, patch, lambda or strategy")->required();
  s->add_option("--values", sw.values, "Comma-separated values")->required()->delimiter(',');
  s->add_option("--data", sw.data, "Dataset file")->required();
  s->add_option("--out", sw.out, "Output directory")->required();
  s->add_option("--config", sw.config, "Base train config file");
  s->add_option("--mode", sw.mode)
      ->check(CLI::IsMember({"baseline", "augment", "maskris"}))
      ->capture_default_str();
  s->add_option("--seeds", sw.seeds, "Seeds per value")->capture_default_str();
  s->add_option("--seed", sw.seed, "First seed");
  auto* s_epochs = s->add_option("--epochs", sw_epochs, "Override the config epochs");
  s->add_option("--jobs", sw.jobs, "Parallel trainings")->capture_default_str();

  PreviewOpts pv;
  auto* p = app.add_subcommand("mask-preview", "Write PGM previews of an image mask");
  p->add_option("--data", pv.data, "Dataset file")->required();
  p->add_option("--image-from-data", pv.index, "Sample index")->required();
  p->add_option("--strategy", pv.strategy, "patch, grid, block or cutout")->capture_default_str();
  p->add_option("--ratio", pv.ratio)->capture_default_str();
  p->add_option("--patch", pv.patch)->capture_default_str();
  p->add_option("--seed", pv.seed);
  p->add_option("--out", pv.out, "Output directory")->required();

  ProbOpts pb;
  auto* q = app.add_subcommand("mask-prob", "Probability that an object is fully masked");
  q->add_option("--cells", pb.cells)->capture_default_str();
  q->add_option("--masked", pb.masked)->capture_default_str();
  q->add_option("--object-cells", pb.object_cells)->capture_default_str();
  q->add_option("--draws", pb.draws, "Monte-Carlo draws; 0 skips");
  q->add_option("--seed", pb.seed);

  ReplayOpts rp;
  auto* r = app.add_subcommand("replay", "Rerun a command from its manifest");
  r->add_option("--manifest", rp.manifest, "Manifest file")->required();
  r->add_option("--out", rp.out, "Redirect the output path");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*g) return cmd_gen(gen, args, ctx);
  if (*t) {
    if (*t_seed) tr.seed = tr_seed;
    if (*t_epochs) tr.epochs = tr_epochs;
    return cmd_train(tr, args, ctx);
  }
  if (*e) return cmd_eval(ev, args, ctx);
  if (*s) {
    if (*s_epochs) sw.epochs = sw_epochs;
    return cmd_sweep(sw, args, ctx);
  }
  if (*p) return cmd_mask_preview(pv, args, ctx);
  if (*q) return cmd_mask_prob(pb);
  if (*r) return cmd_replay(rp, ctx);
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args, Context{});
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const TrainingDiverged& ex) {
    std::cerr << "error: training diverged: " << ex.what() << "\n";
    return kExitDiverged;
  } catch (const FormatError& ex) {
    std::cerr << "error: corrupt artifact: " << ex.what() << "\n";
    return kExitCorrupt;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
}
