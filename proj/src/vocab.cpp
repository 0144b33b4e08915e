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

#include "maskris/vocab.hpp"

#include <cctype>
#include <sstream>

#include "maskris/errors.hpp"

namespace maskris {

Vocabulary Vocabulary::standard() {
  return Vocabulary({"red", "green", "blue", "yellow", "square", "circle", "triangle",
                     "left", "right", "top", "bottom", "middle", "first", "second", "third",
                     "from"});
}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  entries_ = {"[PAD]", "[MASK]", "[UNK]"};
  for (auto& w : words) entries_.push_back(std::move(w));
  if (entries_.size() > 65535) throw InvalidArgument("vocabulary exceeds 16-bit IDs");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], static_cast<std::uint16_t>(i)).second) {
      throw InvalidArgument("duplicate vocabulary word '" + entries_[i] + "'");
    }
  }
}

std::uint16_t Vocabulary::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end() || it->second < kFirstWordId) return kUnkId;
  return it->second;
}

const std::string& Vocabulary::word(std::uint16_t id) const {
  if (id >= entries_.size()) throw InvalidArgument("token id out of vocabulary range");
  return entries_[id];
}

std::vector<std::string> Vocabulary::content_words() const {
  return {entries_.begin() + kFirstWordId, entries_.end()};
}

TokenSequence tokenize(std::string_view expression, const Vocabulary& vocab, int max_len) {
  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), kPadId);
  std::istringstream in{std::string(expression)};
  std::string word;
  while (in >> word && seq.valid_len < max_len) {
    for (auto& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    seq.ids[static_cast<std::size_t>(seq.valid_len++)] = vocab.id(word);
  }
  return seq;
}

std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::string out;
  for (int i = 0; i < tokens.valid_len; ++i) {
    if (i) out += ' ';
    out += vocab.word(tokens.ids[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace maskris
