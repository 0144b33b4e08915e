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

#include "maskris/checkpoint.hpp"

#include <cstring>
#include <memory>

#include "binio.hpp"
#include "maskris/errors.hpp"

namespace maskris::io {

namespace {
constexpr char kMagic[8] = {'M', 'R', 'I', 'S', 'C', 'K', 'P', 'T'};
}

std::vector<std::uint8_t> encode_checkpoint(const model::ModelState& state) {
  const model::ModelConfig& cfg = state.config();
  binio::Writer w;
  w.bytes(std::string_view(kMagic, sizeof(kMagic)));
  w.u32(kCheckpointVersion);
  for (int v : {cfg.embed_dim, cfg.fusion_layers, cfg.patch_size, cfg.vocab_size,
                cfg.image_height, cfg.image_width}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u64(state.step());
  w.u64(state.params().size());
  for (double v : state.params()) w.f64(v);
  for (double v : state.first_moment()) w.f64(v);
  for (double v : state.second_moment()) w.f64(v);
  w.u64(binio::checksum(w.data().data(), w.size()));
  return std::move(w.data());
}

model::ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  binio::Reader tail(bytes.data() + body, 8);
  if (tail.u64() != binio::checksum(bytes.data(), body)) {
    throw FormatError("checkpoint checksum mismatch");
  }
  binio::Reader r(bytes.data() + sizeof(kMagic), body - sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  model::ModelConfig cfg;
  for (int* v : {&cfg.embed_dim, &cfg.fusion_layers, &cfg.patch_size, &cfg.vocab_size,
                 &cfg.image_height, &cfg.image_width}) {
    *v = static_cast<int>(r.u32());
  }
  std::unique_ptr<model::ModelState> state;
  try {
    state = std::make_unique<model::ModelState>(cfg);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  state->set_step(r.u64());
  const std::uint64_t n = r.u64();
  if (n != state->params().size()) throw FormatError("checkpoint parameter count mismatch");
  for (double& v : state->mutable_params()) v = r.f64();
  for (double& v : state->mutable_first_moment()) v = r.f64();
  for (double& v : state->mutable_second_moment()) v = r.f64();
  if (r.remaining() != 0) throw FormatError("trailing bytes in checkpoint");
  return std::move(*state);
}

void save_checkpoint(const std::string& path, const model::ModelState& state) {
  binio::write_file_atomic(path, encode_checkpoint(state));
}

model::ModelState load_checkpoint(const std::string& path) {
  return decode_checkpoint(binio::read_file(path));
}

}  // namespace maskris::io
