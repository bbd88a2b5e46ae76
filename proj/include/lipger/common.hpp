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

#ifndef LIPGER_COMMON_HPP_
#define LIPGER_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lipger {

// Violated precondition on an argument (shape, range, emptiness).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad or missing input data: malformed files, unknown ids, stage artifacts.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf or divergence during numeric work.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LIPGER_REQUIRE(cond, msg)                       \
  do {                                                  \
    if (!(cond)) throw ::lipger::PreconditionError(msg); \
  } while (false)

using Words = std::vector<std::string>;

/// Seeded generator with platform-independent draws. std::mt19937_64 output
/// is fully specified; the std distributions are not, so conversions live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
// Derives an independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// Lowercases, strips punctuation (apostrophes inside words are kept) and
/// collapses whitespace.
std::string normalize_text(std::string_view text);
Words split_words(std::string_view text);
std::string join_words(const Words& words, std::string_view sep = " ");

}  // namespace lipger

#endif  // LIPGER_COMMON_HPP_
