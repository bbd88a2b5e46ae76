// Copyright 2026 The lipger Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LIPGER_TOKENIZER_HPP_
#define LIPGER_TOKENIZER_HPP_

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lipger/common.hpp"

namespace lipger {

// Whitespace word-level tokenizer. A trailing comma is split into its own
// "," token so list joiners do not multiply the vocabulary.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecial = 4;

  Tokenizer();
  // `vocab` must start with the four specials in id order.
  explicit Tokenizer(Words vocab);

  // Specials followed by every distinct piece of `texts`, sorted.
  static Tokenizer build(const std::vector<std::string>& texts);
  static Words pieces(std::string_view text);

  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;

  int id(const std::string& piece) const;
  int size() const { return static_cast<int>(vocab_.size()); }
  const Words& vocab() const { return vocab_; }

  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);

  bool operator==(const Tokenizer& o) const { return vocab_ == o.vocab_; }

 private:
  Words vocab_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace lipger

#endif  // LIPGER_TOKENIZER_HPP_
