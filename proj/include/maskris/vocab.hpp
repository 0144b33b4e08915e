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

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "maskris/types.hpp"

namespace maskris {

// Word list with reserved IDs PAD=0, MASK=1, UNK=2 at the front. IDs are
// positions in the list, so they are stable for a fixed list.
class Vocabulary {
 public:
  // The closed vocabulary of the synthetic expression templates.
  static Vocabulary standard();
  // `words` excludes the reserved entries.
  explicit Vocabulary(std::vector<std::string> words);

  int size() const { return static_cast<int>(entries_.size()); }
  std::uint16_t id(std::string_view word) const;
  const std::string& word(std::uint16_t id) const;
  // Words after the reserved entries, in ID order.
  std::vector<std::string> content_words() const;

  bool operator==(const Vocabulary& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::uint16_t> index_;
};

// Whitespace split, lowercase, unknown words to UNK, truncate or PAD to
// max_len.
TokenSequence tokenize(std::string_view expression, const Vocabulary& vocab,
                       int max_len = kDefaultMaxTokens);

std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab);

}  // namespace maskris
