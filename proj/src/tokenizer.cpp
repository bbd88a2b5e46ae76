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

#include "lipger/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace lipger {

namespace {
const Words kSpecials = {"<pad>", "<s>", "</s>", "<unk>"};
}

Tokenizer::Tokenizer() : Tokenizer(kSpecials) {}

Tokenizer::Tokenizer(Words vocab) : vocab_(std::move(vocab)) {
  if (vocab_.size() < kNumSpecial || !std::equal(kSpecials.begin(), kSpecials.end(), vocab_.begin()))
    throw DataError("tokenizer vocabulary must start with <pad> <s> </s> <unk>");
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    if (!index_.emplace(vocab_[i], static_cast<int>(i)).second)
      throw DataError("tokenizer vocabulary repeats '" + vocab_[i] + "'");
}

Words Tokenizer::pieces(std::string_view text) {
  Words out;
  for (auto& w : split_words(text)) {
    if (w.size() > 1 && w.back() == ',') {
      w.pop_back();
      out.push_back(std::move(w));
      out.emplace_back(",");
    } else {
      out.push_back(std::move(w));
    }
  }
  return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts) {
  std::set<std::string> uniq;
  for (const auto& t : texts)
    for (auto& p : pieces(t)) uniq.insert(std::move(p));
  Words vocab = kSpecials;
  for (const auto& p : uniq)
    if (std::find(kSpecials.begin(), kSpecials.end(), p) == kSpecials.end()) vocab.push_back(p);
  return Tokenizer(std::move(vocab));
}

std::vector<int> Tokenizer::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& p : pieces(text)) ids.push_back(id(p));
  return ids;
}

std::string Tokenizer::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    LIPGER_REQUIRE(i >= 0 && i < size(), "detokenize: id out of range");
    const std::string& w = vocab_[static_cast<std::size_t>(i)];
    if (!out.empty() && w != ",") out.push_back(' ');
    out += w;
  }
  return out;
}

int Tokenizer::id(const std::string& piece) const {
  const auto it = index_.find(piece);
  return it == index_.end() ? kUnk : it->second;
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& w : vocab_) out << w << '\n';
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary " + path);
  Words vocab;
  std::string line;
  while (std::getline(in, line)) vocab.push_back(line);
  return Tokenizer(std::move(vocab));
}

}  // namespace lipger
