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

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "maskris/errors.hpp"
#include "maskris/synthdata.hpp"

namespace maskris::synth {

namespace {

// Severity tables, index = severity - 1. Each row is strictly increasing in
// distortion.
constexpr std::array<double, 5> kNoiseSigma = {0.04, 0.08, 0.12, 0.18, 0.26};
constexpr std::array<double, 5> kShotPhotons = {60.0, 25.0, 12.0, 5.0, 3.0};
constexpr std::array<double, 5> kBlurSigma = {0.5, 1.0, 1.5, 2.0, 3.0};
constexpr double kBrightnessStep = 0.1;
constexpr std::array<double, 5> kContrastScale = {0.75, 0.6, 0.45, 0.3, 0.15};

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

ImageBuffer blur(const ImageBuffer& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= total;

  const int H = in.height();
  const int W = in.width();
  std::vector<double> tmp(static_cast<std::size_t>(H) * W * 3, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, W - 1);
          acc += k[static_cast<std::size_t>(i + radius)] * in.at(y, xx, c);
        }
        tmp[(static_cast<std::size_t>(y) * W + x) * 3 + c] = acc;
      }
    }
  }
  ImageBuffer out(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, H - 1);
          acc += k[static_cast<std::size_t>(i + radius)] *
                 tmp[(static_cast<std::size_t>(yy) * W + x) * 3 + c];
        }
        out.at(y, x, c) = clamp01(acc);
      }
    }
  }
  return out;
}

}  // namespace

Corruption parse_corruption(std::string_view name) {
  if (name == "gaussian_noise") return Corruption::kGaussianNoise;
  if (name == "shot_noise") return Corruption::kShotNoise;
  if (name == "gaussian_blur") return Corruption::kGaussianBlur;
  if (name == "brightness") return Corruption::kBrightness;
  if (name == "contrast") return Corruption::kContrast;
  throw InvalidArgument("unknown corruption '" + std::string(name) + "'");
}

std::string_view corruption_name(Corruption c) {
  switch (c) {
    case Corruption::kGaussianNoise:
      return "gaussian_noise";
    case Corruption::kShotNoise:
      return "shot_noise";
    case Corruption::kGaussianBlur:
      return "gaussian_blur";
    case Corruption::kBrightness:
      return "brightness";
    case Corruption::kContrast:
      return "contrast";
  }
  return "?";
}

ImageBuffer corrupt(const ImageBuffer& image, Corruption kind, int severity, RngStream& rng) {
  if (severity < 1 || severity > 5) {
    throw InvalidArgument("corruption severity must be in 1..5, got " + std::to_string(severity));
  }
  const auto s = static_cast<std::size_t>(severity - 1);
  ImageBuffer out = image;
  auto values = out.values();
  switch (kind) {
    case Corruption::kGaussianNoise:
      for (float& v : values) v = clamp01(v + kNoiseSigma[s] * rng.normal());
      return out;
    case Corruption::kShotNoise:
      for (float& v : values) {
        const double photons = kShotPhotons[s];
        v = clamp01(static_cast<double>(rng.poisson(v * photons)) / photons);
      }
      return out;
    case Corruption::kGaussianBlur:
      return blur(image, kBlurSigma[s]);
    case Corruption::kBrightness:
      for (float& v : values) v = clamp01(v + kBrightnessStep * severity);
      return out;
    case Corruption::kContrast: {
      double mean = 0.0;
      for (float v : values) mean += v;
      mean /= static_cast<double>(values.size());
      for (float& v : values) v = clamp01((v - mean) * kContrastScale[s] + mean);
      return out;
    }
  }
  throw InvalidArgument("unknown corruption kind");
}

double mean_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidArgument("image dimensions differ");
  }
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(static_cast<double>(av[i]) - bv[i]);
  return acc / static_cast<double>(av.size());
}

}  // namespace maskris::synth
