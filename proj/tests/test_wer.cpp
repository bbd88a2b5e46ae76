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

#include <gtest/gtest.h>


#include "lipger/wer.hpp"

namespace lipger {
namespace {

// Plain recursive edit distance, no table.
int edit_distance(const Words& a, std::size_t i, const Words& b, std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  const int sub = edit_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const int del = edit_distance(a, i + 1, b, j) + 1;
  const int ins = edit_distance(a, i, b, j + 1) + 1;
  return std::min(sub, std::min(del, ins));
}

TEST(Wer, TemplateBoxExample) {
  const auto c = wer_counts(split_words("you are very kind"), split_words("you a very kind day"));
  EXPECT_EQ(c.substitutions, 1);
  EXPECT_EQ(c.insertions, 1);
  EXPECT_EQ(c.deletions, 0);
  EXPECT_EQ(c.ref_words, 4);
  EXPECT_DOUBLE_EQ(c.wer(), 0.5);
  EXPECT_EQ(edit_distance(split_words("you are very kind"), 0, split_words("you a very kind day"), 0), 2);
}

TEST(Wer, TrivialCases) {
  EXPECT_EQ(wer_counts({"a", "b"}, {"a", "b"}).errors(), 0);
  const auto del = wer_counts({"a", "b"}, {});
  EXPECT_EQ(del.deletions, 2);
  EXPECT_DOUBLE_EQ(del.wer(), 1.0);
  EXPECT_EQ(wer_counts({"a"}, {"b", "c", "d"}).errors(), 3);
  EXPECT_THROW(wer_counts({}, {"a"}), PreconditionError);
}

TEST(Wer, MatchesRecursiveOracle) {
  Rng rng(17);
  const Words alphabet{"a", "b", "c"};
  for (int t = 0; t < 3000; ++t) {
    Words r(1 + rng.index(6)), h(rng.index(7));
    for (auto& w : r) w = alphabet[rng.index(3)];
    for (auto& w : h) w = alphabet[rng.index(3)];
    const auto c = wer_counts(r, h);
    EXPECT_EQ(c.errors(), edit_distance(r, 0, h, 0));
    // An alignment consumes every word on both sides.
    EXPECT_EQ(static_cast<std::int64_t>(r.size()) - c.deletions + c.insertions, static_cast<std::int64_t>(h.size()));
    EXPECT_GE(c.errors(), std::abs(static_cast<int>(r.size()) - static_cast<int>(h.size())));
  }
}

TEST(Wer, CountsAccumulate) {
  WerCounts total;
  total += wer_counts({"a", "b"}, {"a"});
  total += wer_counts({"c", "d"}, {"c", "d", "e"});
  EXPECT_EQ(total.ref_words, 4);
  EXPECT_EQ(total.errors(), 2);
  EXPECT_DOUBLE_EQ(total.wer(), 0.5);
  EXPECT_DOUBLE_EQ(WerCounts{}.wer(), 0.0);
}

TEST(Wer, InvariantUnderVocabularyRelabelling) {
  Rng rng(23);
  const Words alphabet{"a", "b", "c", "d"};
  for (int t = 0; t < 500; ++t) {
    Words perm = alphabet;
    rng.shuffle(perm);
    auto relabel = [&](const Words& w) {
      Words out;
      for (const auto& x : w) out.push_back(perm[static_cast<std::size_t>(x[0] - 'a')]);
      return out;
    };
    Words r(1 + rng.index(6)), h(rng.index(6));
    for (auto& w : r) w = alphabet[rng.index(4)];
    for (auto& w : h) w = alphabet[rng.index(4)];
    EXPECT_EQ(wer_counts(r, h), wer_counts(relabel(r), relabel(h)));
  }
}

TEST(Wer, CorpusWerIsCountWeighted) {
  const auto a = wer_counts(split_words("a b c d"), split_words("a c d"));
  const auto b = wer_counts(split_words("x y"), split_words("y y z"));
  WerCounts all = a;
  all += b;
  const double weighted = (a.wer() * a.ref_words + b.wer() * b.ref_words) / (a.ref_words + b.ref_words);
  EXPECT_DOUBLE_EQ(all.wer(), weighted);
}

TEST(Wer, TieBreakPrefersSubstitution) {
  // "a b" -> "c": one substitution plus one deletion, never two deletions and an insertion.
  const auto c = wer_counts({"a", "b"}, {"c"});
  EXPECT_EQ(c.substitutions, 1);
  EXPECT_EQ(c.deletions, 1);
  EXPECT_EQ(c.insertions, 0);
  EXPECT_LE(c.substitutions + c.deletions, c.ref_words);
}

}  // namespace
}  // namespace lipger
