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

#include "maskris/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "maskris/errors.hpp"

namespace maskris::synth {

namespace {

constexpr std::array<std::array<float, 3>, 4> kBaseColors = {{
    {0.90f, 0.15f, 0.15f},  // red
    {0.15f, 0.80f, 0.20f},  // green
    {0.15f, 0.25f, 0.90f},  // blue
    {0.90f, 0.85f, 0.15f},  // yellow
}};
constexpr float kColorJitter = 0.08f;
constexpr float kPixelNoise = 0.03f;
constexpr double kBackgroundLo = 0.10;
constexpr double kBackgroundHi = 0.30;
constexpr int kShapeGap = 2;
constexpr int kOccluderMin = 6;
constexpr int kOccluderMax = 16;
constexpr double kOcclusionTagFraction = 0.2;
constexpr double kMinVisibleFraction = 0.4;

std::optional<Color> parse_color(std::string_view w) {
  if (w == "red") return Color::kRed;
  if (w == "green") return Color::kGreen;
  if (w == "blue") return Color::kBlue;
  if (w == "yellow") return Color::kYellow;
  return std::nullopt;
}

std::optional<ShapeKind> parse_kind(std::string_view w) {
  if (w == "square") return ShapeKind::kSquare;
  if (w == "circle") return ShapeKind::kCircle;
  if (w == "triangle") return ShapeKind::kTriangle;
  return std::nullopt;
}

std::optional<int> parse_ordinal(std::string_view w) {
  if (w == "first") return 0;
  if (w == "second") return 1;
  if (w == "third") return 2;
  return std::nullopt;
}

// Sorts candidate indices by coordinate, ascending or descending, and checks
// that consecutive centers are separated enough to make rank unambiguous.
bool rank_along(const std::vector<Shape>& shapes, std::vector<int>& idx, bool use_x,
                bool descending) {
  auto coord = [&](int i) { return use_x ? shapes[i].cx : shapes[i].cy; };
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return descending ? coord(a) > coord(b) : coord(a) < coord(b);
  });
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (std::abs(coord(idx[i]) - coord(idx[i - 1])) < kMinSeparation) return false;
  }
  return true;
}

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

bool overlaps(const Shape& a, const Shape& b) {
  const double reach = (a.size + b.size) / 2.0 + kShapeGap;
  return std::abs(a.cx - b.cx) < reach && std::abs(a.cy - b.cy) < reach;
}

bool place(Shape& s, const std::vector<Shape>& placed, const SceneConfig& cfg, RngStream& rng) {
  const double half = s.size / 2.0;
  for (int tries = 0; tries < 100; ++tries) {
    s.cx = rng.uniform(half + 1.0, cfg.image_width - half - 1.0);
    s.cy = rng.uniform(half + 1.0, cfg.image_height - half - 1.0);
    bool ok = true;
    for (const auto& p : placed) ok = ok && !overlaps(s, p);
    if (ok) return true;
  }
  return false;
}

Shape random_attributes(const SceneConfig& cfg, RngStream& rng) {
  Shape s;
  s.kind = static_cast<ShapeKind>(rng.uniform_int(3));
  s.color = static_cast<Color>(rng.uniform_int(4));
  s.size = cfg.min_shape_size +
           static_cast<int>(rng.uniform_int(
               static_cast<std::uint64_t>(cfg.max_shape_size - cfg.min_shape_size + 1)));
  return s;
}

int random_in(RngStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Attribute lists for one attempt; the referent is chosen after placement
// for positional templates.
struct Draft {
  std::vector<Shape> shapes;
  std::vector<int> group;  // shapes the expression ranges over
};

Draft draft_color_kind(const SceneConfig& cfg, RngStream& rng) {
  Draft d;
  const int n = random_in(rng, cfg.min_shapes, cfg.max_shapes);
  for (int i = 0; i < n; ++i) d.shapes.push_back(random_attributes(cfg, rng));
  const int ref = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  for (int i = 0; i < n; ++i) {
    if (i == ref) continue;
    while (d.shapes[i].kind == d.shapes[ref].kind && d.shapes[i].color == d.shapes[ref].color) {
      d.shapes[i] = random_attributes(cfg, rng);
    }
  }
  d.group = {ref};
  return d;
}

Draft draft_position(const SceneConfig& cfg, RngStream& rng) {
  Draft d;
  const int max_group = std::min(3, cfg.max_shapes);
  const int g = random_in(rng, 2, max_group);
  const Shape proto = random_attributes(cfg, rng);
  for (int i = 0; i < g; ++i) {
    Shape s = random_attributes(cfg, rng);
    s.kind = proto.kind;
    s.color = proto.color;
    d.shapes.push_back(s);
    d.group.push_back(i);
  }
  const int others = random_in(rng, std::max(0, cfg.min_shapes - g), cfg.max_shapes - g);
  for (int i = 0; i < others; ++i) {
    Shape s = random_attributes(cfg, rng);
    while (s.kind == proto.kind && s.color == proto.color) s = random_attributes(cfg, rng);
    d.shapes.push_back(s);
  }
  return d;
}

Draft draft_ordinal(const SceneConfig& cfg, RngStream& rng) {
  Draft d;
  const int max_group = std::min(3, cfg.max_shapes);
  const int m = random_in(rng, 2, max_group);
  const auto kind = static_cast<ShapeKind>(rng.uniform_int(3));
  for (int i = 0; i < m; ++i) {
    Shape s = random_attributes(cfg, rng);
    s.kind = kind;
    d.shapes.push_back(s);
    d.group.push_back(i);
  }
  const int others = random_in(rng, std::max(0, cfg.min_shapes - m), cfg.max_shapes - m);
  for (int i = 0; i < others; ++i) {
    Shape s = random_attributes(cfg, rng);
    while (s.kind == kind) s = random_attributes(cfg, rng);
    d.shapes.push_back(s);
  }
  return d;
}

// Pixels of shape `s` on the image grid.
std::vector<int> shape_pixels(const Shape& s, int height, int width) {
  std::vector<int> px;
  const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.size / 2.0)) - 1);
  const int y1 = std::min(height, static_cast<int>(std::ceil(s.cy + s.size / 2.0)) + 1);
  const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.size / 2.0)) - 1);
  const int x1 = std::min(width, static_cast<int>(std::ceil(s.cx + s.size / 2.0)) + 1);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (s.contains(x + 0.5, y + 0.5)) px.push_back(y * width + x);
    }
  }
  return px;
}

Rect clamp_rect(Rect r, int height, int width) {
  r.x0 = std::clamp(r.x0, 0, width);
  r.x1 = std::clamp(r.x1, 0, width);
  r.y0 = std::clamp(r.y0, 0, height);
  r.y1 = std::clamp(r.y1, 0, height);
  return r;
}

std::uint8_t template_tag(Template t) {
  switch (t) {
    case Template::kColorKind:
      return 0;
    case Template::kPosition:
      return kTagRelativePosition;
    case Template::kOrdinal:
      return kTagOrdering;
  }
  return 0;
}

}  // namespace

std::string_view kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kSquare:
      return "square";
    case ShapeKind::kCircle:
      return "circle";
    case ShapeKind::kTriangle:
      return "triangle";
  }
  return "?";
}

std::string_view color_name(Color c) {
  switch (c) {
    case Color::kRed:
      return "red";
    case Color::kGreen:
      return "green";
    case Color::kBlue:
      return "blue";
    case Color::kYellow:
      return "yellow";
  }
  return "?";
}

bool Shape::contains(double px, double py) const {
  const double half = size / 2.0;
  const double dx = px - cx;
  const double dy = py - cy;
  switch (kind) {
    case ShapeKind::kSquare:
      return std::abs(dx) < half && std::abs(dy) < half;
    case ShapeKind::kCircle:
      return dx * dx + dy * dy < half * half;
    case ShapeKind::kTriangle: {
      // Apex up, base at the bottom edge of the bounding square.
      const double down = py - (cy - half);
      return down > 0.0 && dy < half && std::abs(dx) < down / 2.0;
    }
  }
  return false;
}

void SceneConfig::validate() const {
  if (image_height <= 0 || image_width <= 0 || patch_size <= 0 ||
      image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw InvalidArgument("image size must be divisible by the patch size");
  }
  if (min_shapes < 2 || max_shapes > 5 || min_shapes > max_shapes) {
    throw InvalidArgument("shape count must satisfy 2 <= min_shapes <= max_shapes <= 5");
  }
  if (min_shape_size < 4 || min_shape_size > max_shape_size ||
      max_shape_size + 2 >= std::min(image_height, image_width)) {
    throw InvalidArgument("shape sizes do not fit the image");
  }
  if (occluder_prob < 0.0 || occluder_prob > 1.0 || p_position_template < 0.0 ||
      p_ordinal_template < 0.0 || p_position_template + p_ordinal_template > 1.0) {
    throw InvalidArgument("scene probabilities out of range");
  }
  if (max_tokens < 1 || max_retries < 1) throw InvalidArgument("bad token or retry limits");
}

std::optional<int> resolve_expression(const std::vector<Shape>& shapes,
                                      std::string_view expression) {
  const auto words = split_words(expression);
  std::vector<int> cand;
  if (words.size() == 2 || words.size() == 3) {
    const auto color = parse_color(words[words.size() - 2]);
    const auto kind = parse_kind(words[words.size() - 1]);
    if (!color || !kind) return std::nullopt;
    for (int i = 0; i < static_cast<int>(shapes.size()); ++i) {
      if (shapes[i].color == *color && shapes[i].kind == *kind) cand.push_back(i);
    }
    if (cand.empty()) return std::nullopt;
    if (words.size() == 2) {
      return cand.size() == 1 ? std::optional<int>(cand[0]) : std::nullopt;
    }
    const std::string& pos = words[0];
    if (pos == "middle") {
      if (cand.size() != 3) return std::nullopt;
      double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
      for (int i : cand) {
        xmin = std::min(xmin, shapes[i].cx);
        xmax = std::max(xmax, shapes[i].cx);
        ymin = std::min(ymin, shapes[i].cy);
        ymax = std::max(ymax, shapes[i].cy);
      }
      if (!rank_along(shapes, cand, xmax - xmin >= ymax - ymin, false)) return std::nullopt;
      return cand[1];
    }
    bool use_x = true;
    bool descending = false;
    if (pos == "left") {
    } else if (pos == "right") {
      descending = true;
    } else if (pos == "top") {
      use_x = false;
    } else if (pos == "bottom") {
      use_x = false;
      descending = true;
    } else {
      return std::nullopt;
    }
    if (!rank_along(shapes, cand, use_x, descending)) return std::nullopt;
    return cand[0];
  }
  if (words.size() == 4) {
    const auto ordinal = parse_ordinal(words[0]);
    const auto kind = parse_kind(words[1]);
    if (!ordinal || !kind || words[2] != "from") return std::nullopt;
    const std::string& side = words[3];
    bool use_x = true;
    bool descending = false;
    if (side == "left") {
    } else if (side == "right") {
      descending = true;
    } else if (side == "top") {
      use_x = false;
    } else if (side == "bottom") {
      use_x = false;
      descending = true;
    } else {
      return std::nullopt;
    }
    for (int i = 0; i < static_cast<int>(shapes.size()); ++i) {
      if (shapes[i].kind == *kind) cand.push_back(i);
    }
    if (static_cast<int>(cand.size()) <= *ordinal) return std::nullopt;
    if (!rank_along(shapes, cand, use_x, descending)) return std::nullopt;
    return cand[static_cast<std::size_t>(*ordinal)];
  }
  return std::nullopt;
}

SceneSpec generate_scene_spec(const SceneConfig& cfg, RngStream& rng) {
  cfg.validate();
  SceneSpec scene;
  const double u = rng.uniform();
  if (u < cfg.p_position_template) {
    scene.expression_template = Template::kPosition;
  } else if (u < cfg.p_position_template + cfg.p_ordinal_template) {
    scene.expression_template = Template::kOrdinal;
  } else {
    scene.expression_template = Template::kColorKind;
  }

  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    Draft d;
    switch (scene.expression_template) {
      case Template::kColorKind:
        d = draft_color_kind(cfg, rng);
        break;
      case Template::kPosition:
        d = draft_position(cfg, rng);
        break;
      case Template::kOrdinal:
        d = draft_ordinal(cfg, rng);
        break;
    }
    std::vector<Shape> placed;
    bool ok = true;
    for (auto& s : d.shapes) {
      if (!place(s, placed, cfg, rng)) {
        ok = false;
        break;
      }
      placed.push_back(s);
    }
    if (!ok) continue;

    int referent = d.group[0];
    std::string expr;
    const Shape& first = d.shapes[static_cast<std::size_t>(d.group[0])];
    if (scene.expression_template == Template::kColorKind) {
      expr = std::string(color_name(first.color)) + " " + std::string(kind_name(first.kind));
    } else if (scene.expression_template == Template::kPosition) {
      static constexpr std::array<std::string_view, 5> kWords = {"left", "right", "top",
                                                                 "bottom", "middle"};
      const std::size_t choices = d.group.size() == 3 ? 5 : 4;
      const std::string_view pos = kWords[rng.uniform_int(choices)];
      expr = std::string(pos) + " " + std::string(color_name(first.color)) + " " +
             std::string(kind_name(first.kind));
      const auto r = resolve_expression(d.shapes, expr);
      if (!r) continue;
      referent = *r;
    } else {
      static constexpr std::array<std::string_view, 4> kSides = {"left", "right", "top",
                                                                 "bottom"};
      static constexpr std::array<std::string_view, 3> kOrdinals = {"first", "second",
                                                                    "third"};
      const std::string_view side = kSides[rng.uniform_int(4)];
      const std::string_view ord = kOrdinals[rng.uniform_int(d.group.size())];
      expr = std::string(ord) + " " + std::string(kind_name(first.kind)) + " from " +
             std::string(side);
      const auto r = resolve_expression(d.shapes, expr);
      if (!r) continue;
      referent = *r;
    }
    if (resolve_expression(d.shapes, expr) != std::optional<int>(referent)) continue;

    std::vector<Rect> occluders;
    if (rng.bernoulli(cfg.occluder_prob)) {
      const int w = random_in(rng, kOccluderMin, kOccluderMax);
      const int h = random_in(rng, kOccluderMin, kOccluderMax);
      Rect r;
      if (rng.bernoulli(0.5)) {
        // Over the referent.
        const Shape& ref = d.shapes[static_cast<std::size_t>(referent)];
        const int bx0 = static_cast<int>(std::floor(ref.cx - ref.size / 2.0));
        const int by0 = static_cast<int>(std::floor(ref.cy - ref.size / 2.0));
        r.x0 = random_in(rng, bx0 - w + 3, bx0 + ref.size - 3);
        r.y0 = random_in(rng, by0 - h + 3, by0 + ref.size - 3);
      } else {
        r.x0 = random_in(rng, 0, cfg.image_width - w);
        r.y0 = random_in(rng, 0, cfg.image_height - h);
      }
      r.x1 = r.x0 + w;
      r.y1 = r.y0 + h;
      r = clamp_rect(r, cfg.image_height, cfg.image_width);
      if (r.area() > 0) occluders.push_back(r);
    }
    const auto ref_px = shape_pixels(d.shapes[static_cast<std::size_t>(referent)],
                                     cfg.image_height, cfg.image_width);
    std::size_t visible = 0;
    for (int p : ref_px) {
      bool hidden = false;
      for (const auto& r : occluders) hidden = hidden || r.contains(p % cfg.image_width, p / cfg.image_width);
      visible += hidden ? 0 : 1;
    }
    if (ref_px.empty() ||
        static_cast<double>(visible) < kMinVisibleFraction * static_cast<double>(ref_px.size())) {
      continue;
    }

    scene.shapes = std::move(d.shapes);
    scene.occluders = std::move(occluders);
    scene.referent_index = referent;
    scene.expression = std::move(expr);
    return scene;
  }
  throw GenerationFailed("could not place a uniquely referable scene");
}

SampleRecord render_scene(const SceneSpec& scene, const SceneConfig& cfg,
                          const Vocabulary& vocab, RngStream& rng) {
  const int H = cfg.image_height;
  const int W = cfg.image_width;
  SampleRecord rec;
  rec.image = ImageBuffer(H, W);
  const auto bg = static_cast<float>(rng.uniform(kBackgroundLo, kBackgroundHi));
  for (float& v : rec.image.values()) v = bg;

  for (const auto& s : scene.shapes) {
    std::array<float, 3> col = kBaseColors[static_cast<std::size_t>(s.color)];
    for (float& c : col) c += static_cast<float>(rng.uniform(-kColorJitter, kColorJitter));
    for (int p : shape_pixels(s, H, W)) {
      for (int c = 0; c < 3; ++c) rec.image.at(p / W, p % W, c) = col[static_cast<std::size_t>(c)];
    }
  }
  for (float& v : rec.image.values()) {
    v = std::clamp(v + static_cast<float>(rng.uniform(-kPixelNoise, kPixelNoise)), 0.0f, 1.0f);
  }
  for (const auto& r : scene.occluders) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        for (int c = 0; c < 3; ++c) rec.image.at(y, x, c) = kOccluderGray;
      }
    }
  }

  rec.gt_mask = PixelMask(H, W);
  const auto ref_px = shape_pixels(scene.shapes[static_cast<std::size_t>(scene.referent_index)], H, W);
  std::size_t hidden = 0;
  for (int p : ref_px) {
    bool occluded = false;
    for (const auto& r : scene.occluders) occluded = occluded || r.contains(p % W, p / W);
    if (occluded) {
      ++hidden;
    } else {
      rec.gt_mask.set(p / W, p % W, true);
    }
  }
  rec.tags = template_tag(scene.expression_template);
  if (!ref_px.empty() &&
      static_cast<double>(hidden) >= kOcclusionTagFraction * static_cast<double>(ref_px.size())) {
    rec.tags |= kTagOcclusion;
  }
  rec.expression = scene.expression;
  rec.tokens = tokenize(scene.expression, vocab, cfg.max_tokens);
  return rec;
}

SampleRecord generate_scene(const SceneConfig& cfg, const Vocabulary& vocab, RngStream& rng) {
  RngStream layout = rng.derive("layout");
  RngStream paint = rng.derive("render");
  return render_scene(generate_scene_spec(cfg, layout), cfg, vocab, paint);
}

std::vector<const SampleRecord*> Dataset::split(Split which) const {
  std::vector<const SampleRecord*> out;
  for (const auto& s : samples) {
    if (s.split == which) out.push_back(&s);
  }
  return out;
}

std::vector<Split> assign_splits(int count) {
  std::vector<std::pair<std::uint64_t, int>> keys;
  keys.reserve(static_cast<std::size_t>(count));
  const std::uint64_t salt = hash_label("split");
  for (int i = 0; i < count; ++i) {
    keys.emplace_back(mix64(salt ^ mix64(static_cast<std::uint64_t>(i))), i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<Split> splits(static_cast<std::size_t>(count), Split::kTrain);
  for (int r = 0; r < count / 10; ++r) splits[static_cast<std::size_t>(keys[static_cast<std::size_t>(r)].second)] = Split::kVal;
  return splits;
}

Dataset generate_dataset(std::uint64_t seed, int count, const SceneConfig& cfg) {
  if (count < 1) throw InvalidArgument("dataset count must be >= 1");
  cfg.validate();
  Dataset ds;
  ds.seed = seed;
  ds.config = cfg;
  ds.vocab = Vocabulary::standard();
  const auto splits = assign_splits(count);
  const RngStream root(seed, "dataset");
  ds.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const RngStream per_sample = root.derive("sample", static_cast<std::uint64_t>(i));
    for (std::uint64_t attempt = 0;; ++attempt) {
      RngStream rng = per_sample.derive("attempt", attempt);
      try {
        SampleRecord rec = generate_scene(cfg, ds.vocab, rng);
        rec.split = splits[static_cast<std::size_t>(i)];
        ds.samples.push_back(std::move(rec));
        break;
      } catch (const GenerationFailed&) {
        if (attempt >= 100) throw;
      }
    }
  }
  return ds;
}

OccludeResult occlude_eval(const SampleRecord& sample, double fraction, RngStream& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("occlusion fraction must lie in (0, 1)");
  }
  OccludeResult out{sample, false, {}};
  const PixelMask& gt = sample.gt_mask;
  int x0 = gt.width(), y0 = gt.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.get(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  const int bw = x1 - x0;
  const int bh = y1 - y0;
  const double side = std::sqrt(fraction);
  const int rw = bw > 0 ? static_cast<int>(std::lround(side * bw)) : 0;
  const int rh = bh > 0 ? static_cast<int>(std::lround(side * bh)) : 0;
  if (rw < 1 || rh < 1 || rw >= bw + 1 || bw < 2 || bh < 2) {
    out.warning = true;
    return out;
  }
  Rect r;
  r.x0 = x0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(bw - rw + 1)));
  r.y0 = y0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(bh - rh + 1)));
  r.x1 = r.x0 + rw;
  r.y1 = r.y0 + rh;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      for (int c = 0; c < 3; ++c) out.sample.image.at(y, x, c) = kOccluderGray;
    }
  }
  out.sample.tags |= kTagOcclusion;
  out.painted = r;
  return out;
}

}  // namespace maskris::synth
