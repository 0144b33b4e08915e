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

// Synthetic referring-segmentation scenes: 2-5 colored shapes on a noisy
// gray background, optional gray occluders, a templated expression that
// denotes exactly one shape, and the visible pixels of that shape as ground
// truth.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskris/rng.hpp"
#include "maskris/types.hpp"
#include "maskris/vocab.hpp"

namespace maskris::synth {

enum class ShapeKind : std::uint8_t { kSquare, kCircle, kTriangle };
enum class Color : std::uint8_t { kRed, kGreen, kBlue, kYellow };

std::string_view kind_name(ShapeKind k);
std::string_view color_name(Color c);

struct Shape {
  ShapeKind kind = ShapeKind::kSquare;
  Color color = Color::kRed;
  double cx = 0.0;  // center, pixel units
  double cy = 0.0;
  int size = 0;     // side (square, triangle base/height) or diameter

  // Sampled at pixel centers (x + 0.5, y + 0.5).
  bool contains(double px, double py) const;
};

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

enum class Template : std::uint8_t { kColorKind, kPosition, kOrdinal };

struct SceneSpec {
  std::vector<Shape> shapes;
  std::vector<Rect> occluders;
  int referent_index = 0;
  Template expression_template = Template::kColorKind;
  std::string expression;
};

// Tag bits.
inline constexpr std::uint8_t kTagOcclusion = 1;
inline constexpr std::uint8_t kTagRelativePosition = 2;
inline constexpr std::uint8_t kTagOrdering = 4;

enum class Split : std::uint8_t { kTrain = 0, kVal = 1 };

struct SampleRecord {
  ImageBuffer image;
  std::string expression;
  TokenSequence tokens;
  PixelMask gt_mask;
  std::uint8_t tags = 0;
  Split split = Split::kTrain;

  bool operator==(const SampleRecord&) const = default;
};

struct SceneConfig {
  int image_height = 64;
  int image_width = 64;
  int patch_size = 8;
  int min_shapes = 2;
  int max_shapes = 5;
  int min_shape_size = 12;
  int max_shape_size = 20;
  double occluder_prob = 0.3;
  double p_position_template = 0.25;
  double p_ordinal_template = 0.25;
  int max_tokens = kDefaultMaxTokens;
  int max_retries = 200;

  void validate() const;
};

inline constexpr float kOccluderGray = 0.5f;
// Minimum center separation along the ordering axis for positional and
// ordinal expressions to count as unambiguous.
inline constexpr double kMinSeparation = 4.0;

// Parses `expression` with the template grammar and resolves it against the
// scene. Returns the index of the single matching shape, or nullopt when the
// expression matches none, several, or is not in the grammar.
std::optional<int> resolve_expression(const std::vector<Shape>& shapes,
                                      std::string_view expression);

// Throws GenerationFailed after cfg.max_retries unsuccessful placements.
SceneSpec generate_scene_spec(const SceneConfig& cfg, RngStream& rng);

// Rasterizes the scene. `rng` drives only background and color noise.
SampleRecord render_scene(const SceneSpec& scene, const SceneConfig& cfg,
                          const Vocabulary& vocab, RngStream& rng);

SampleRecord generate_scene(const SceneConfig& cfg, const Vocabulary& vocab, RngStream& rng);

struct Dataset {
  std::uint64_t seed = 0;
  SceneConfig config;
  Vocabulary vocab = Vocabulary::standard();
  std::vector<SampleRecord> samples;

  std::vector<const SampleRecord*> split(Split which) const;
};

// Deterministic in (seed, cfg). Exactly count / 10 samples (rounded down) are
// labelled val, chosen by a hash of the sample index.
Dataset generate_dataset(std::uint64_t seed, int count, const SceneConfig& cfg);

// Split labels for `count` samples.
std::vector<Split> assign_splits(int count);

struct OccludeResult {
  SampleRecord sample;
  bool warning = false;  // referent too small; sample returned unchanged
  Rect painted;
};

// Paints a gray rectangle of about `fraction` of the referent bounding box,
// at a random position inside it. Ground truth is left untouched.
OccludeResult occlude_eval(const SampleRecord& sample, double fraction, RngStream& rng);

enum class Corruption : std::uint8_t {
  kGaussianNoise,
  kShotNoise,
  kGaussianBlur,
  kBrightness,
  kContrast
};

inline constexpr Corruption kAllCorruptions[] = {Corruption::kGaussianNoise,
                                                 Corruption::kShotNoise,
                                                 Corruption::kGaussianBlur,
                                                 Corruption::kBrightness,
                                                 Corruption::kContrast};

Corruption parse_corruption(std::string_view name);
std::string_view corruption_name(Corruption c);

// Severity in 1..5. Output clamped to [0, 1].
ImageBuffer corrupt(const ImageBuffer& image, Corruption kind, int severity, RngStream& rng);

// Mean absolute per-value difference, used as the distortion measure.
double mean_abs_diff(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace maskris::synth
