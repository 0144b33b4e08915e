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

#include "maskris/dataset_io.hpp"

#include <cstring>

#include "binio.hpp"
#include "maskris/errors.hpp"

namespace maskris::io {

namespace {
constexpr char kMagic[8] = {'M', 'R', 'I', 'S', 'D', 'S', 'E', 'T'};
}

std::vector<std::uint8_t> encode_dataset(const synth::Dataset& ds) {
  const synth::SceneConfig& cfg = ds.config;
  binio::Writer w;
  w.bytes(std::string_view(kMagic, sizeof(kMagic)));
  w.u32(kDatasetVersion);
  w.u64(ds.seed);
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  for (int v : {cfg.image_height, cfg.image_width, cfg.patch_size, cfg.max_tokens, cfg.min_shapes,
                cfg.max_shapes, cfg.min_shape_size, cfg.max_shape_size, cfg.max_retries}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(cfg.occluder_prob);
  w.f64(cfg.p_position_template);
  w.f64(cfg.p_ordinal_template);
  const auto words = ds.vocab.content_words();
  w.u32(static_cast<std::uint32_t>(ds.vocab.size()));
  for (int i = 0; i < ds.vocab.size(); ++i) w.str16(ds.vocab.word(static_cast<std::uint16_t>(i)));

  const std::size_t pixels = static_cast<std::size_t>(cfg.image_height) * cfg.image_width;
  for (const auto& s : ds.samples) {
    if (s.image.height() != cfg.image_height || s.image.width() != cfg.image_width ||
        s.gt_mask.pixel_count() != pixels ||
        s.tokens.ids.size() != static_cast<std::size_t>(cfg.max_tokens)) {
      throw InvalidArgument("sample does not match the dataset geometry");
    }
    const std::size_t at = w.size();
    w.u32(0);
    w.u8(static_cast<std::uint8_t>(s.split));
    w.u8(s.tags);
    w.u16(static_cast<std::uint16_t>(s.tokens.valid_len));
    w.str16(s.expression);
    for (std::uint16_t id : s.tokens.ids) w.u16(id);
    for (float v : s.image.values()) w.f32(v);
    const auto bits = s.gt_mask.bits();
    for (std::size_t i = 0; i < pixels; i += 8) {
      std::uint8_t byte = 0;
      for (std::size_t b = 0; b < 8 && i + b < pixels; ++b) {
        if (bits[i + b]) byte |= static_cast<std::uint8_t>(1u << b);
      }
      w.u8(byte);
    }
    w.patch_u32(at, static_cast<std::uint32_t>(w.size() - at - 4));
  }
  w.u64(binio::checksum(w.data().data(), w.size()));
  return std::move(w.data());
}

synth::Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a dataset file (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  binio::Reader tail(bytes.data() + body, 8);
  if (tail.u64() != binio::checksum(bytes.data(), body)) {
    throw FormatError("dataset checksum mismatch");
  }
  binio::Reader r(bytes.data() + sizeof(kMagic), body - sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  synth::Dataset ds;
  ds.seed = r.u64();
  const std::uint32_t count = r.u32();
  synth::SceneConfig& cfg = ds.config;
  for (int* v : {&cfg.image_height, &cfg.image_width, &cfg.patch_size, &cfg.max_tokens,
                 &cfg.min_shapes, &cfg.max_shapes, &cfg.min_shape_size, &cfg.max_shape_size,
                 &cfg.max_retries}) {
    *v = static_cast<int>(r.u32());
  }
  cfg.occluder_prob = r.f64();
  cfg.p_position_template = r.f64();
  cfg.p_ordinal_template = r.f64();
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  const std::uint32_t vocab_size = r.u32();
  if (vocab_size <= kFirstWordId) throw FormatError("dataset vocabulary too small");
  std::vector<std::string> words;
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    std::string word = r.str16();
    if (i >= kFirstWordId) words.push_back(std::move(word));
  }
  ds.vocab = Vocabulary(std::move(words));

  const std::size_t pixels = static_cast<std::size_t>(cfg.image_height) * cfg.image_width;
  const auto max_tokens = static_cast<std::size_t>(cfg.max_tokens);
  ds.samples.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::uint32_t record_bytes = r.u32();
    const std::size_t before = r.remaining();
    synth::SampleRecord s;
    const std::uint8_t split = r.u8();
    if (split > 1) throw FormatError("bad split label");
    s.split = static_cast<synth::Split>(split);
    s.tags = r.u8();
    s.tokens.valid_len = r.u16();
    if (static_cast<std::size_t>(s.tokens.valid_len) > max_tokens) {
      throw FormatError("valid_len exceeds max_tokens");
    }
    s.expression = r.str16();
    s.tokens.ids.resize(max_tokens);
    for (auto& id : s.tokens.ids) {
      id = r.u16();
      if (id >= vocab_size) throw FormatError("token id outside the vocabulary");
    }
    s.image = ImageBuffer(cfg.image_height, cfg.image_width);
    for (float& v : s.image.values()) v = r.f32();
    s.gt_mask = PixelMask(cfg.image_height, cfg.image_width);
    auto bits = s.gt_mask.bits();
    const std::uint8_t* packed = r.raw((pixels + 7) / 8);
    for (std::size_t i = 0; i < pixels; ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    if (before - r.remaining() != record_bytes) throw FormatError("record length mismatch");
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last record");
  return ds;
}

void write_dataset(const std::string& path, const synth::Dataset& ds) {
  binio::write_file_atomic(path, encode_dataset(ds));
}

synth::Dataset read_dataset(const std::string& path) {
  return decode_dataset(binio::read_file(path));
}

}  // namespace maskris::io
