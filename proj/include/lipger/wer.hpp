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

#ifndef LIPGER_WER_HPP_
#define LIPGER_WER_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "lipger/common.hpp"

namespace lipger {

struct WerCounts {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t ref_words = 0;

  std::int64_t errors() const { return substitutions + deletions + insertions; }
  double wer() const { return ref_words > 0 ? static_cast<double>(errors()) / static_cast<double>(ref_words) : 0.0; }

  WerCounts& operator+=(const WerCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_words += o.ref_words;
    return *this;
  }
  bool operator==(const WerCounts&) const = default;
};

// Minimal-edit alignment with unit costs. Among equal-cost alignments the
// backtrace prefers substitution (or match), then insertion, then deletion.
template <class T>
WerCounts wer_counts(std::span<const T> ref, std::span<const T> hyp) {
  LIPGER_REQUIRE(!ref.empty(), "wer_counts: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<int> d((n + 1) * w);
  for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    d[i * w] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = d[(i - 1) * w + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int ins = d[i * w + j - 1] + 1;
      const int del = d[(i - 1) * w + j] + 1;
      d[i * w + j] = std::min(diag, std::min(ins, del));
    }
  }
  WerCounts c;
  c.ref_words = static_cast<std::int64_t>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const int here = d[i * w + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (here == d[(i - 1) * w + j - 1] + (same ? 0 : 1)) {
        if (!same) ++c.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && here == d[i * w + j - 1] + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

inline WerCounts wer_counts(const Words& ref, const Words& hyp) {
  return wer_counts<std::string>(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

}  // namespace lipger

#endif  // LIPGER_WER_HPP_
