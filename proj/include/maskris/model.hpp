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

// Vision-language segmentation network with hand-derived reverse mode.
//
//   patches --linear--> + positional  = H0                  (P x D)
//   tokens  --embed-->  E (valid rows only), s = mean(E)    (L x D)
//   per fusion layer:
//     C  = CrossAttn(H, E)            patches query words
//     Z  = H + C + H * (s Wg + bg)    sentence-conditioned gate
//     U  = Z + SelfAttn(Z)            patches exchange context
//     H' = tanh(U)
//   per pixel in patch p with colour x:
//     logit = H_p w + b + x . (H_p A + a)     A is D x 3
//   clamped to [-30, 30], then sigmoid.
//
// The first two terms are the per-patch head, broadcast to the patch's
// pixels. The colour term lets the patch token pick which colours count as
// foreground, so a mask edge can fall inside a patch.
//
// All attention is single-head, scaled by 1/sqrt(D), without biases.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskris/rng.hpp"
#include "maskris/types.hpp"

namespace maskris::model {

struct ModelConfig {
  int embed_dim = 16;
  int fusion_layers = 2;
  int patch_size = 8;
  int vocab_size = 19;
  int image_height = 64;
  int image_width = 64;

  void validate() const;
  int rows() const { return image_height / patch_size; }
  int cols() const { return image_width / patch_size; }
  int patches() const { return rows() * cols(); }
  int patch_dim() const { return 3 * patch_size * patch_size; }

  bool operator==(const ModelConfig&) const = default;
};

// Offsets of each parameter block inside the flat parameter vector. The
// order here is the serialization order.
struct LayerOffsets {
  std::size_t cross_q, cross_k, cross_v, cross_o;
  std::size_t gate_w, gate_b;
  std::size_t self_q, self_k, self_v, self_o;
};

struct ParamLayout {
  std::size_t patch_w = 0;
  std::size_t patch_b = 0;
  std::size_t pos = 0;
  std::size_t word_emb = 0;
  std::vector<LayerOffsets> layers;
  std::size_t head_w = 0;
  std::size_t head_b = 0;
  std::size_t color_w = 0;
  std::size_t color_b = 0;
  std::size_t total = 0;
  // Parameters in [0, encoder_end) belong to the patch and word encoders.
  std::size_t encoder_end = 0;

  static ParamLayout for_config(const ModelConfig& cfg);
};

using ParamGrads = std::vector<double>;

class ModelState {
 public:
  ModelState() = default;
  explicit ModelState(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }

  std::span<const double> params() const { return params_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  std::uint64_t step() const { return step_; }

  // Mutable access invalidates outstanding forward caches.
  std::span<double> mutable_params() {
    ++version_;
    return params_;
  }
  std::span<double> mutable_first_moment() { return m_; }
  std::span<double> mutable_second_moment() { return v_; }
  void set_step(std::uint64_t s) { step_ = s; }

  std::uint64_t version() const { return version_; }

  bool all_finite() const;
  // Bitwise equality of parameters, moments and step.
  bool same_values(const ModelState& other) const;

 private:
  ModelConfig cfg_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t step_ = 0;
  std::uint64_t version_ = 0;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, Uniform(-0.02, 0.02)
// embeddings, zero moments. Biases are zero except the head bias, which
// starts at the log-odds of a 5% foreground prior.
ModelState init_params(const ModelConfig& cfg, RngStream& rng);

// Per-pixel foreground probabilities, each in [sigmoid(-30), sigmoid(30)].
struct PredMask {
  int height = 0;
  int width = 0;
  std::vector<double> prob;

  std::size_t size() const { return prob.size(); }
};

inline constexpr double kLogitClamp = 30.0;

struct ForwardCache {
  const ModelState* state = nullptr;
  std::uint64_t state_version = 0;

  std::vector<double> patches;   // P x K
  std::vector<std::uint16_t> ids;  // valid tokens
  std::vector<double> words;     // L x D
  std::vector<double> sentence;  // D

  struct Layer {
    std::vector<double> h_in;                      // P x D
    std::vector<double> cq, ck, cv, ca, co;        // cross attention
    std::vector<double> gate;                      // D
    std::vector<double> z;                         // P x D
    std::vector<double> sq, sk, sv, sa, so;        // self attention
    std::vector<double> h_out;                     // P x D
  };
  std::vector<Layer> layers;

  std::vector<double> color_coef;  // P x 3
  std::vector<double> pixels;      // H x W x 3
  std::vector<double> raw_logits;  // H x W, before clamping
  std::vector<double> pixel_prob;  // H x W
};

struct ForwardResult {
  PredMask pred;
  ForwardCache cache;
};

// Throws InvalidArgument on dimension mismatch, empty expressions or
// out-of-vocabulary IDs.
ForwardResult forward(const ModelState& state, const ImageBuffer& image,
                      const TokenSequence& tokens);

// Forward without retaining intermediates.
PredMask predict(const ModelState& state, const ImageBuffer& image, const TokenSequence& tokens);

// Exact gradient of sum_i grad_wrt_pred[i] * pred[i] with respect to every
// parameter. Throws InvalidState when the model changed after the forward.
ParamGrads backward(const ForwardCache& cache, std::span<const double> grad_wrt_pred);

// Same, accumulating `scale * grad` into `out`.
void backward_accumulate(const ForwardCache& cache, std::span<const double> grad_wrt_pred,
                         double scale, std::span<double> out);

}  // namespace maskris::model
