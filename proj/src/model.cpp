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

#include "maskris/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "maskris/errors.hpp"
#include "maskris/kernels.hpp"

namespace maskris::model {

namespace {

using simd::kernels;

void softmax_rows(std::vector<double>& s, std::size_t n, std::size_t m) {
  const auto& K = kernels();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = s.data() + i * m;
    const double mx = *std::max_element(row, row + m);
    for (std::size_t j = 0; j < m; ++j) row[j] -= mx;
    K.vexp(row, row, m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) total += row[j];
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < m; ++j) row[j] *= inv;
  }
}

struct AttnWeights {
  const double* q;
  const double* k;
  const double* v;
  const double* o;
};

struct AttnGrads {
  double* q;
  double* k;
  double* v;
  double* o;
};

// y += Attn(x, ctx). Keeps q, k, v, attention probabilities and the
// pre-output mix for the backward pass.
void attn_forward(const std::vector<double>& x, const std::vector<double>& ctx, std::size_t n,
                  std::size_t m, std::size_t d, const AttnWeights& w, std::vector<double>& q,
                  std::vector<double>& k, std::vector<double>& v, std::vector<double>& a,
                  std::vector<double>& o, double* y) {
  const auto& K = kernels();
  q.assign(n * d, 0.0);
  k.assign(m * d, 0.0);
  v.assign(m * d, 0.0);
  K.matmul_acc(x.data(), w.q, q.data(), n, d, d);
  K.matmul_acc(ctx.data(), w.k, k.data(), m, d, d);
  K.matmul_acc(ctx.data(), w.v, v.data(), m, d, d);
  a.assign(n * m, 0.0);
  K.matmul_nt_acc(q.data(), k.data(), a.data(), n, m, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& s : a) s *= scale;
  softmax_rows(a, n, m);
  o.assign(n * d, 0.0);
  K.matmul_acc(a.data(), v.data(), o.data(), n, m, d);
  K.matmul_acc(o.data(), w.o, y, n, d, d);
}

// Given dy, accumulates weight gradients plus dx and dctx.
void attn_backward(const std::vector<double>& dy, const std::vector<double>& x,
                   const std::vector<double>& ctx, std::size_t n, std::size_t m, std::size_t d,
                   const AttnWeights& w, const std::vector<double>& q, const std::vector<double>& k,
                   const std::vector<double>& v, const std::vector<double>& a,
                   const std::vector<double>& o, const AttnGrads& g, double* dx, double* dctx) {
  const auto& K = kernels();
  K.matmul_tn_acc(o.data(), dy.data(), g.o, n, d, d);
  std::vector<double> d_o(n * d, 0.0);
  K.matmul_nt_acc(dy.data(), w.o, d_o.data(), n, d, d);

  std::vector<double> da(n * m, 0.0);
  K.matmul_nt_acc(d_o.data(), v.data(), da.data(), n, m, d);
  std::vector<double> dv(m * d, 0.0);
  K.matmul_tn_acc(a.data(), d_o.data(), dv.data(), n, m, d);

  // Softmax backward, folding in the 1/sqrt(d) score scale.
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> ds(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.data() + i * m;
    const double* dar = da.data() + i * m;
    const double inner = K.dot(ar, dar, m);
    for (std::size_t j = 0; j < m; ++j) ds[i * m + j] = ar[j] * (dar[j] - inner) * scale;
  }
  std::vector<double> dq(n * d, 0.0);
  K.matmul_acc(ds.data(), k.data(), dq.data(), n, m, d);
  std::vector<double> dk(m * d, 0.0);
  K.matmul_tn_acc(ds.data(), q.data(), dk.data(), n, m, d);

  K.matmul_tn_acc(x.data(), dq.data(), g.q, n, d, d);
  K.matmul_tn_acc(ctx.data(), dk.data(), g.k, m, d, d);
  K.matmul_tn_acc(ctx.data(), dv.data(), g.v, m, d, d);
  K.matmul_nt_acc(dq.data(), w.q, dx, n, d, d);
  K.matmul_nt_acc(dk.data(), w.k, dctx, m, d, d);
  K.matmul_nt_acc(dv.data(), w.v, dctx, m, d, d);
}

void fill_uniform(std::span<double> dst, double bound, RngStream& rng) {
  for (double& v : dst) v = rng.uniform(-bound, bound);
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim < 2) throw InvalidArgument("embed_dim must be >= 2");
  if (fusion_layers < 1) throw InvalidArgument("fusion_layers must be >= 1");
  if (patch_size < 1 || image_height < patch_size || image_width < patch_size ||
      image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw InvalidArgument("patch_size must divide the image dimensions");
  }
  if (vocab_size <= kFirstWordId || vocab_size > 65536) {
    throw InvalidArgument("vocab_size out of range");
  }
}

ParamLayout ParamLayout::for_config(const ModelConfig& cfg) {
  const auto D = static_cast<std::size_t>(cfg.embed_dim);
  const auto DD = D * D;
  ParamLayout l;
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t off = at;
    at += n;
    return off;
  };
  l.patch_w = take(static_cast<std::size_t>(cfg.patch_dim()) * D);
  l.patch_b = take(D);
  l.pos = take(static_cast<std::size_t>(cfg.patches()) * D);
  l.word_emb = take(static_cast<std::size_t>(cfg.vocab_size) * D);
  l.encoder_end = at;
  for (int i = 0; i < cfg.fusion_layers; ++i) {
    LayerOffsets lo{};
    lo.cross_q = take(DD);
    lo.cross_k = take(DD);
    lo.cross_v = take(DD);
    lo.cross_o = take(DD);
    lo.gate_w = take(DD);
    lo.gate_b = take(D);
    lo.self_q = take(DD);
    lo.self_k = take(DD);
    lo.self_v = take(DD);
    lo.self_o = take(DD);
    l.layers.push_back(lo);
  }
  l.head_w = take(D);
  l.head_b = take(1);
  l.color_w = take(D * 3);
  l.color_b = take(3);
  l.total = at;
  return l;
}

ModelState::ModelState(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  layout_ = ParamLayout::for_config(cfg_);
  params_.assign(layout_.total, 0.0);
  m_.assign(layout_.total, 0.0);
  v_.assign(layout_.total, 0.0);
}

bool ModelState::all_finite() const {
  auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(params_) && finite(m_) && finite(v_);
}

bool ModelState::same_values(const ModelState& other) const {
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  return cfg_ == other.cfg_ && step_ == other.step_ && same(params_, other.params_) &&
         same(m_, other.m_) && same(v_, other.v_);
}

ModelState init_params(const ModelConfig& cfg, RngStream& rng) {
  ModelState state(cfg);
  const ParamLayout& l = state.layout();
  auto p = state.mutable_params();
  const auto D = static_cast<std::size_t>(cfg.embed_dim);
  const double w_bound = 1.0 / std::sqrt(static_cast<double>(D));
  constexpr double kEmbedScale = 0.02;

  RngStream r = rng.derive("init");
  fill_uniform(p.subspan(l.patch_w, static_cast<std::size_t>(cfg.patch_dim()) * D),
               1.0 / std::sqrt(static_cast<double>(cfg.patch_dim())), r);
  fill_uniform(p.subspan(l.pos, static_cast<std::size_t>(cfg.patches()) * D), kEmbedScale, r);
  fill_uniform(p.subspan(l.word_emb, static_cast<std::size_t>(cfg.vocab_size) * D), kEmbedScale, r);
  for (const auto& lo : l.layers) {
    for (std::size_t off : {lo.cross_q, lo.cross_k, lo.cross_v, lo.cross_o, lo.gate_w,
                            lo.self_q, lo.self_k, lo.self_v, lo.self_o}) {
      fill_uniform(p.subspan(off, D * D), w_bound, r);
    }
  }
  fill_uniform(p.subspan(l.head_w, D), w_bound, r);
  fill_uniform(p.subspan(l.color_w, D * 3), w_bound, r);
  // Start the head at the foreground prior (about 5% of pixels) so early
  // steps are not spent pushing every pixel to background.
  p[l.head_b] = std::log(0.05 / 0.95);
  return state;
}

ForwardResult forward(const ModelState& state, const ImageBuffer& image,
                      const TokenSequence& tokens) {
  const ModelConfig& cfg = state.config();
  if (image.height() != cfg.image_height || image.width() != cfg.image_width) {
    throw InvalidArgument("image is " + std::to_string(image.height()) + "x" +
                          std::to_string(image.width()) + ", model expects " +
                          std::to_string(cfg.image_height) + "x" +
                          std::to_string(cfg.image_width));
  }
  if (tokens.valid_len < 1 || static_cast<std::size_t>(tokens.valid_len) > tokens.ids.size()) {
    throw InvalidArgument("token sequence has no valid tokens");
  }
  const auto& K = kernels();
  const ParamLayout& l = state.layout();
  const double* p = state.params().data();
  const auto D = static_cast<std::size_t>(cfg.embed_dim);
  const auto P = static_cast<std::size_t>(cfg.patches());
  const auto KD = static_cast<std::size_t>(cfg.patch_dim());
  const int ps = cfg.patch_size;
  const int cols = cfg.cols();

  ForwardResult res;
  ForwardCache& c = res.cache;
  c.state = &state;
  c.state_version = state.version();

  // Patch vectors, (dy, dx, channel) order.
  c.patches.resize(P * KD);
  for (std::size_t pi = 0; pi < P; ++pi) {
    const int r0 = static_cast<int>(pi) / cols * ps;
    const int c0 = static_cast<int>(pi) % cols * ps;
    double* dst = c.patches.data() + pi * KD;
    for (int dy = 0; dy < ps; ++dy) {
      for (int dx = 0; dx < ps; ++dx) {
        for (int ch = 0; ch < 3; ++ch) *dst++ = image.at(r0 + dy, c0 + dx, ch);
      }
    }
  }

  const auto L = static_cast<std::size_t>(tokens.valid_len);
  c.ids.assign(tokens.ids.begin(), tokens.ids.begin() + static_cast<std::ptrdiff_t>(L));
  c.words.resize(L * D);
  c.sentence.assign(D, 0.0);
  for (std::size_t j = 0; j < L; ++j) {
    if (c.ids[j] >= cfg.vocab_size) throw InvalidArgument("token id outside the vocabulary");
    const double* e = p + l.word_emb + c.ids[j] * D;
    std::copy(e, e + D, c.words.begin() + static_cast<std::ptrdiff_t>(j * D));
    K.axpy(1.0 / static_cast<double>(L), e, c.sentence.data(), D);
  }

  std::vector<double> h(P * D);
  for (std::size_t pi = 0; pi < P; ++pi) {
    for (std::size_t j = 0; j < D; ++j) h[pi * D + j] = p[l.patch_b + j] + p[l.pos + pi * D + j];
  }
  K.matmul_acc(c.patches.data(), p + l.patch_w, h.data(), P, KD, D);

  c.layers.resize(l.layers.size());
  for (std::size_t li = 0; li < l.layers.size(); ++li) {
    const LayerOffsets& lo = l.layers[li];
    ForwardCache::Layer& lc = c.layers[li];
    lc.h_in = h;

    lc.z = h;
    attn_forward(lc.h_in, c.words, P, L, D,
                 {p + lo.cross_q, p + lo.cross_k, p + lo.cross_v, p + lo.cross_o}, lc.cq, lc.ck,
                 lc.cv, lc.ca, lc.co, lc.z.data());
    lc.gate.assign(p + lo.gate_b, p + lo.gate_b + D);
    K.matmul_acc(c.sentence.data(), p + lo.gate_w, lc.gate.data(), 1, D, D);
    for (std::size_t pi = 0; pi < P; ++pi) {
      for (std::size_t j = 0; j < D; ++j) lc.z[pi * D + j] += lc.h_in[pi * D + j] * lc.gate[j];
    }

    std::vector<double> u = lc.z;
    attn_forward(lc.z, lc.z, P, P, D, {p + lo.self_q, p + lo.self_k, p + lo.self_v, p + lo.self_o},
                 lc.sq, lc.sk, lc.sv, lc.sa, lc.so, u.data());
    // tanh(u) = 1 - 2 / (exp(2u) + 1)
    lc.h_out.resize(P * D);
    for (std::size_t i = 0; i < P * D; ++i) lc.h_out[i] = 2.0 * u[i];
    K.vexp(lc.h_out.data(), lc.h_out.data(), P * D);
    for (double& v : lc.h_out) v = 1.0 - 2.0 / (v + 1.0);
    h = lc.h_out;
  }

  // Patch-level base logit plus a colour term whose coefficients the patch
  // token chooses, so boundaries can be drawn inside a patch.
  std::vector<double> base(P);
  for (std::size_t pi = 0; pi < P; ++pi) {
    base[pi] = K.dot(h.data() + pi * D, p + l.head_w, D) + p[l.head_b];
  }
  c.color_coef.assign(P * 3, 0.0);
  for (std::size_t pi = 0; pi < P; ++pi) {
    for (std::size_t ch = 0; ch < 3; ++ch) c.color_coef[pi * 3 + ch] = p[l.color_b + ch];
  }
  K.matmul_acc(h.data(), p + l.color_w, c.color_coef.data(), P, D, 3);

  const std::size_t npix = static_cast<std::size_t>(cfg.image_height) * cfg.image_width;
  c.pixels.assign(image.values().begin(), image.values().end());
  c.raw_logits.resize(npix);
  PredMask& pred = res.pred;
  pred.height = cfg.image_height;
  pred.width = cfg.image_width;
  pred.prob.resize(npix);
  for (int y = 0; y < cfg.image_height; ++y) {
    const int row = y / ps;
    for (int x = 0; x < cfg.image_width; ++x) {
      const std::size_t pi = static_cast<std::size_t>(row * cols + x / ps);
      const std::size_t px = static_cast<std::size_t>(y) * cfg.image_width + x;
      const double* rgb = c.pixels.data() + 3 * px;
      const double* a = c.color_coef.data() + 3 * pi;
      const double z = base[pi] + rgb[0] * a[0] + rgb[1] * a[1] + rgb[2] * a[2];
      c.raw_logits[px] = z;
      pred.prob[px] = -std::clamp(z, -kLogitClamp, kLogitClamp);
    }
  }
  K.vexp(pred.prob.data(), pred.prob.data(), npix);
  for (double& v : pred.prob) v = 1.0 / (1.0 + v);
  c.pixel_prob = pred.prob;
  return res;
}

PredMask predict(const ModelState& state, const ImageBuffer& image, const TokenSequence& tokens) {
  return forward(state, image, tokens).pred;
}

void backward_accumulate(const ForwardCache& cache, std::span<const double> grad_wrt_pred,
                         double scale, std::span<double> out) {
  if (cache.state == nullptr) throw InvalidState("backward called with an empty forward cache");
  if (cache.state->version() != cache.state_version) {
    throw InvalidState("forward cache is stale: model parameters changed since the forward pass");
  }
  const ModelState& state = *cache.state;
  const ModelConfig& cfg = state.config();
  const ParamLayout& l = state.layout();
  if (grad_wrt_pred.size() != static_cast<std::size_t>(cfg.image_height) * cfg.image_width) {
    throw InvalidArgument("upstream gradient does not match the prediction size");
  }
  if (out.size() != l.total) throw InvalidArgument("gradient buffer does not match the model");

  const auto& K = kernels();
  const double* p = state.params().data();
  double* g = out.data();
  const auto D = static_cast<std::size_t>(cfg.embed_dim);
  const auto P = static_cast<std::size_t>(cfg.patches());
  const auto KD = static_cast<std::size_t>(cfg.patch_dim());
  const auto L = cache.ids.size();
  const int ps = cfg.patch_size;
  const int cols = cfg.cols();

  std::vector<double> dbase(P, 0.0);
  std::vector<double> dcoef(P * 3, 0.0);
  bool any = false;
  for (int y = 0; y < cfg.image_height; ++y) {
    const int row = y / ps;
    for (int x = 0; x < cfg.image_width; ++x) {
      const std::size_t pi = static_cast<std::size_t>(row * cols + x / ps);
      const std::size_t px = static_cast<std::size_t>(y) * cfg.image_width + x;
      const double z = cache.raw_logits[px];
      if (!(z > -kLogitClamp && z < kLogitClamp)) continue;
      const double pr = cache.pixel_prob[px];
      const double dz = scale * grad_wrt_pred[px] * pr * (1.0 - pr);
      if (dz == 0.0) continue;
      any = true;
      dbase[pi] += dz;
      const double* rgb = cache.pixels.data() + 3 * px;
      for (std::size_t ch = 0; ch < 3; ++ch) dcoef[pi * 3 + ch] += dz * rgb[ch];
    }
  }
  if (!any) return;

  const std::vector<double>& h_last = cache.layers.back().h_out;
  std::vector<double> dh(P * D, 0.0);
  for (std::size_t pi = 0; pi < P; ++pi) {
    K.axpy(dbase[pi], h_last.data() + pi * D, g + l.head_w, D);
    g[l.head_b] += dbase[pi];
    K.axpy(dbase[pi], p + l.head_w, dh.data() + pi * D, D);
    for (std::size_t ch = 0; ch < 3; ++ch) g[l.color_b + ch] += dcoef[pi * 3 + ch];
  }
  K.matmul_tn_acc(h_last.data(), dcoef.data(), g + l.color_w, P, D, 3);
  K.matmul_nt_acc(dcoef.data(), p + l.color_w, dh.data(), P, D, 3);

  std::vector<double> dwords(L * D, 0.0);
  std::vector<double> dsentence(D, 0.0);
  for (std::size_t li = l.layers.size(); li-- > 0;) {
    const LayerOffsets& lo = l.layers[li];
    const ForwardCache::Layer& lc = cache.layers[li];

    std::vector<double> du(P * D);
    for (std::size_t i = 0; i < P * D; ++i) du[i] = dh[i] * (1.0 - lc.h_out[i] * lc.h_out[i]);

    // U = Z + SelfAttn(Z)
    std::vector<double> dz = du;
    attn_backward(du, lc.z, lc.z, P, P, D,
                  {p + lo.self_q, p + lo.self_k, p + lo.self_v, p + lo.self_o}, lc.sq, lc.sk,
                  lc.sv, lc.sa, lc.so, {g + lo.self_q, g + lo.self_k, g + lo.self_v, g + lo.self_o},
                  dz.data(), dz.data());

    // Z = H + CrossAttn(H, E) + H * gate
    std::vector<double> dh_in(P * D);
    std::vector<double> dgate(D, 0.0);
    for (std::size_t pi = 0; pi < P; ++pi) {
      for (std::size_t j = 0; j < D; ++j) {
        const double dzv = dz[pi * D + j];
        dh_in[pi * D + j] = dzv + dzv * lc.gate[j];
        dgate[j] += dzv * lc.h_in[pi * D + j];
      }
    }
    K.matmul_tn_acc(cache.sentence.data(), dgate.data(), g + lo.gate_w, 1, D, D);
    K.axpy(1.0, dgate.data(), g + lo.gate_b, D);
    K.matmul_nt_acc(dgate.data(), p + lo.gate_w, dsentence.data(), 1, D, D);

    attn_backward(dz, lc.h_in, cache.words, P, L, D,
                  {p + lo.cross_q, p + lo.cross_k, p + lo.cross_v, p + lo.cross_o}, lc.cq, lc.ck,
                  lc.cv, lc.ca, lc.co,
                  {g + lo.cross_q, g + lo.cross_k, g + lo.cross_v, g + lo.cross_o}, dh_in.data(),
                  dwords.data());
    dh = std::move(dh_in);
  }

  // Mean pooling spreads the sentence gradient evenly over valid tokens.
  for (std::size_t j = 0; j < L; ++j) {
    K.axpy(1.0 / static_cast<double>(L), dsentence.data(), dwords.data() + j * D, D);
    K.axpy(1.0, dwords.data() + j * D, g + l.word_emb + cache.ids[j] * D, D);
  }

  K.matmul_tn_acc(cache.patches.data(), dh.data(), g + l.patch_w, P, KD, D);
  for (std::size_t pi = 0; pi < P; ++pi) {
    K.axpy(1.0, dh.data() + pi * D, g + l.patch_b, D);
    K.axpy(1.0, dh.data() + pi * D, g + l.pos + pi * D, D);
  }
}

ParamGrads backward(const ForwardCache& cache, std::span<const double> grad_wrt_pred) {
  if (cache.state == nullptr) throw InvalidState("backward called with an empty forward cache");
  ParamGrads grads(cache.state->layout().total, 0.0);
  backward_accumulate(cache, grad_wrt_pred, 1.0, grads);
  return grads;
}

}  // namespace maskris::model
