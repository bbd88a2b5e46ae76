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

#ifndef LIPGER_ASR_HPP_
#define LIPGER_ASR_HPP_

// Toy CTC recogniser: emission lattices over a word vocabulary and an N-best
// CTC prefix beam search, plus an exhaustive path enumerator used as oracle.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lipger/common.hpp"

namespace lipger {

using TokenSeq = std::vector<int>;

// F x (|V|+1) log-probabilities; the last column is the CTC blank.
struct EmissionLattice {
  Words vocab;
  int frames = 0;
  std::vector<double> logp;

  int width() const { return static_cast<int>(vocab.size()) + 1; }
  int blank() const { return static_cast<int>(vocab.size()); }
  double at(int f, int s) const { return logp[static_cast<std::size_t>(f) * width() + s]; }
  double& at(int f, int s) { return logp[static_cast<std::size_t>(f) * width() + s]; }

  // Shape checks and per-row log-sum-exp == 0 within `tol`.
  void validate(double tol = 1e-6) const;
  bool operator==(const EmissionLattice&) const = default;
};

struct Hypothesis {
  TokenSeq tokens;
  double score = 0.0;  // log of summed path probability
  int rank = 0;

  bool operator==(const Hypothesis&) const = default;
};

struct HypothesisList {
  std::vector<Hypothesis> hypotheses;
  // False when fewer distinct sequences existed than were requested.
  bool complete = true;

  std::size_t size() const { return hypotheses.size(); }
  const Hypothesis& operator[](std::size_t i) const { return hypotheses[i]; }
  bool operator==(const HypothesisList&) const = default;
};

// Merge adjacent repeats, then drop blanks.
TokenSeq collapse_ctc(std::span<const int> path, int blank);

// Per-frame argmax path, collapsed.
TokenSeq greedy_decode(const EmissionLattice& lattice);

// confusables[t] lists the tokens that steal probability mass from t.
using ConfusionSets = std::vector<std::vector<int>>;

struct SynthLatticeOptions {
  double confusion_strength = 0.0;  // in [0, 1)
  int frames_per_token = 1;
  std::uint64_t seed = 0;
  double floor_mass = 0.02;  // spread over non-target symbols on every frame
};

// Each transcript token occupies frames_per_token frames, with one
// blank-dominated frame between consecutive tokens. A token segment moves a
// seeded share m = min(0.95, 2 * strength * u), u ~ U[0,1), of its mass onto one
// confusable token, with +-10% per-frame jitter.
EmissionLattice synth_lattice(const Words& vocab, const ConfusionSets& confusables, const TokenSeq& transcript,
                              const SynthLatticeOptions& opts);

HypothesisList ctc_prefix_beam_nbest(const EmissionLattice& lattice, int beam_width, int n_plus_1);

// Every collapsed sequence with its log total probability. Refuses lattices
// with more than `max_paths` paths.
std::map<TokenSeq, double> exhaustive_distribution(const EmissionLattice& lattice, double max_paths = 1e6);
HypothesisList exhaustive_nbest(const EmissionLattice& lattice, int n_plus_1);

// Score divided by max(1, token count).
double length_normalized_score(const Hypothesis& h);

Words tokens_to_words(const TokenSeq& tokens, const Words& vocab);
TokenSeq words_to_tokens(const Words& words, const Words& vocab);

double log_add(double a, double b);

}  // namespace lipger

#endif  // LIPGER_ASR_HPP_
