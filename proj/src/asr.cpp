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

#include "lipger/asr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace lipger {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct PrefixScore {
  double blank = kNegInf;     // paths ending in blank
  double nonblank = kNegInf;  // paths ending in the last token
  double total() const { return log_add(blank, nonblank); }
};

// Descending score, ascending token sequence on ties.
bool ranks_before(const TokenSeq& a, double sa, const TokenSeq& b, double sb) {
  if (sa != sb) return sa > sb;
  return a < b;
}

HypothesisList top_n(std::vector<std::pair<TokenSeq, double>> items, int n_plus_1) {
  std::sort(items.begin(), items.end(),
            [](const auto& x, const auto& y) { return ranks_before(x.first, x.second, y.first, y.second); });
  HypothesisList out;
  out.complete = items.size() >= static_cast<std::size_t>(n_plus_1);
  const std::size_t n = std::min(items.size(), static_cast<std::size_t>(n_plus_1));
  for (std::size_t i = 0; i < n; ++i)
    out.hypotheses.push_back(Hypothesis{std::move(items[i].first), items[i].second, static_cast<int>(i)});
  return out;
}

}  // namespace

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void EmissionLattice::validate(double tol) const {
  if (vocab.empty()) throw PreconditionError("EmissionLattice: empty vocabulary");
  if (frames < 1) throw PreconditionError("EmissionLattice: needs at least one frame");
  if (logp.size() != static_cast<std::size_t>(frames) * width())
    throw PreconditionError("EmissionLattice: expected " + std::to_string(frames) + " x " + std::to_string(width()) +
                            " log-probabilities, got " + std::to_string(logp.size()));
  for (int f = 0; f < frames; ++f) {
    double z = kNegInf;
    for (int s = 0; s < width(); ++s) {
      if (std::isnan(at(f, s)) || at(f, s) > 0.0)
        throw PreconditionError("EmissionLattice: invalid log-probability at frame " + std::to_string(f));
      z = log_add(z, at(f, s));
    }
    if (std::abs(z) > tol)
      throw PreconditionError("EmissionLattice: frame " + std::to_string(f) + " log-sum-exp is " + std::to_string(z));
  }
}

TokenSeq collapse_ctc(std::span<const int> path, int blank) {
  TokenSeq out;
  int prev = -1;
  bool has_prev = false;
  for (int s : path) {
    if (!has_prev || s != prev) {
      if (s != blank) out.push_back(s);
    }
    prev = s;
    has_prev = true;
  }
  return out;
}

TokenSeq greedy_decode(const EmissionLattice& lattice) {
  std::vector<int> path(static_cast<std::size_t>(lattice.frames));
  for (int f = 0; f < lattice.frames; ++f) {
    int best = 0;
    for (int s = 1; s < lattice.width(); ++s)
      if (lattice.at(f, s) > lattice.at(f, best)) best = s;
    path[static_cast<std::size_t>(f)] = best;
  }
  return collapse_ctc(path, lattice.blank());
}

EmissionLattice synth_lattice(const Words& vocab, const ConfusionSets& confusables, const TokenSeq& transcript,
                              const SynthLatticeOptions& opts) {
  LIPGER_REQUIRE(!vocab.empty(), "synth_lattice: empty vocabulary");
  LIPGER_REQUIRE(opts.confusion_strength >= 0.0 && opts.confusion_strength < 1.0,
                 "synth_lattice: confusion_strength must lie in [0, 1)");
  LIPGER_REQUIRE(opts.frames_per_token >= 1, "synth_lattice: frames_per_token must be >= 1");
  LIPGER_REQUIRE(opts.floor_mass > 0.0 && opts.floor_mass < 0.5, "synth_lattice: floor_mass must lie in (0, 0.5)");
  const int nv = static_cast<int>(vocab.size());
  for (int t : transcript)
    if (t < 0 || t >= nv)
      throw PreconditionError("synth_lattice: token id " + std::to_string(t) + " is not in the vocabulary");

  EmissionLattice lat;
  lat.vocab = vocab;
  const int n = static_cast<int>(transcript.size());
  lat.frames = n == 0 ? 1 : n * opts.frames_per_token + (n - 1);
  lat.logp.assign(static_cast<std::size_t>(lat.frames) * lat.width(), 0.0);
  const int blank = lat.blank();
  const int width = lat.width();
  Rng rng(derive_seed(opts.seed, "synth_lattice"));

  // Fills one frame: `main` gets main_p, `conf` (if >= 0) gets conf_p, the
  // floor is spread over every other symbol, then the row is renormalised in
  // log space.
  auto fill = [&](int f, int main, double main_p, int conf, double conf_p) {
    const int others = width - 1 - (conf >= 0 ? 1 : 0);
    const double each = others > 0 ? opts.floor_mass / others : 0.0;
    std::vector<double> p(static_cast<std::size_t>(width), each);
    p[static_cast<std::size_t>(main)] = main_p + (others > 0 ? 0.0 : opts.floor_mass);
    if (conf >= 0) p[static_cast<std::size_t>(conf)] = conf_p;
    double z = kNegInf;
    for (int s = 0; s < width; ++s) z = log_add(z, std::log(p[static_cast<std::size_t>(s)]));
    for (int s = 0; s < width; ++s) lat.at(f, s) = std::log(p[static_cast<std::size_t>(s)]) - z;
  };

  if (n == 0) {
    fill(0, blank, 1.0 - opts.floor_mass, -1, 0.0);
    return lat;
  }
  int f = 0;
  for (int k = 0; k < n; ++k) {
    const int tok = transcript[static_cast<std::size_t>(k)];
    int conf = -1;
    const auto& cs = tok < static_cast<int>(confusables.size()) ? confusables[static_cast<std::size_t>(tok)]
                                                                : std::vector<int>{};
    if (!cs.empty()) {
      conf = cs[rng.index(cs.size())];
    } else if (nv > 1) {
      conf = static_cast<int>(rng.index(static_cast<std::size_t>(nv - 1)));
      if (conf >= tok) ++conf;
    }
    const double share = std::min(0.95, 2.0 * opts.confusion_strength * rng.uniform());
    for (int j = 0; j < opts.frames_per_token; ++j, ++f) {
      const double m = std::clamp(share * (1.0 + 0.2 * (rng.uniform() - 0.5)), 0.0, 0.95);
      const double keep = 1.0 - opts.floor_mass;
      if (conf >= 0 && m > 0.0)
        fill(f, tok, keep * (1.0 - m), conf, keep * m);
      else
        fill(f, tok, keep, -1, 0.0);
    }
    if (k + 1 < n) fill(f++, blank, 1.0 - opts.floor_mass, -1, 0.0);
  }
  return lat;
}

HypothesisList ctc_prefix_beam_nbest(const EmissionLattice& lattice, int beam_width, int n_plus_1) {
  lattice.validate();
  LIPGER_REQUIRE(n_plus_1 >= 2, "ctc_prefix_beam_nbest: n_plus_1 must be >= 2");
  LIPGER_REQUIRE(beam_width >= n_plus_1, "ctc_prefix_beam_nbest: beam_width must be >= n_plus_1");
  const int blank = lattice.blank();
  std::map<TokenSeq, PrefixScore> beam;
  beam[TokenSeq{}] = PrefixScore{0.0, kNegInf};

  for (int f = 0; f < lattice.frames; ++f) {
    std::map<TokenSeq, PrefixScore> next;
    for (const auto& [prefix, sc] : beam) {
      const double total = sc.total();
      for (int s = 0; s < lattice.width(); ++s) {
        const double p = lattice.at(f, s);
        if (s == blank) {
          PrefixScore& e = next[prefix];
          e.blank = log_add(e.blank, total + p);
          continue;
        }
        TokenSeq extended = prefix;
        extended.push_back(s);
        PrefixScore& e = next[extended];
        if (!prefix.empty() && prefix.back() == s) {
          // A repeat only extends after a blank; otherwise it merges.
          e.nonblank = log_add(e.nonblank, sc.blank + p);
          PrefixScore& same = next[prefix];
          same.nonblank = log_add(same.nonblank, sc.nonblank + p);
        } else {
          e.nonblank = log_add(e.nonblank, total + p);
        }
      }
    }
    std::vector<std::pair<TokenSeq, PrefixScore>> items(next.begin(), next.end());
    if (items.size() > static_cast<std::size_t>(beam_width)) {
      std::partial_sort(items.begin(), items.begin() + beam_width, items.end(), [](const auto& x, const auto& y) {
        return ranks_before(x.first, x.second.total(), y.first, y.second.total());
      });
      items.resize(static_cast<std::size_t>(beam_width));
    }
    beam.clear();
    for (auto& [k, v] : items) beam.emplace(std::move(k), v);
  }

  std::vector<std::pair<TokenSeq, double>> finals;
  for (const auto& [prefix, sc] : beam)
    if (sc.total() > kNegInf) finals.emplace_back(prefix, sc.total());
  return top_n(std::move(finals), n_plus_1);
}

std::map<TokenSeq, double> exhaustive_distribution(const EmissionLattice& lattice, double max_paths) {
  lattice.validate();
  const double paths = std::pow(static_cast<double>(lattice.width()), lattice.frames);
  if (paths > max_paths)
    throw PreconditionError("exhaustive_nbest: search space of " + std::to_string(paths) + " paths exceeds limit " +
                            std::to_string(max_paths));
  std::map<TokenSeq, double> dist;
  std::vector<int> path(static_cast<std::size_t>(lattice.frames), 0);
  const auto total = static_cast<std::size_t>(paths);
  for (std::size_t n = 0; n < total; ++n) {
    double lp = 0.0;
    for (int f = 0; f < lattice.frames; ++f) lp += lattice.at(f, path[static_cast<std::size_t>(f)]);
    auto [it, fresh] = dist.try_emplace(collapse_ctc(path, lattice.blank()), lp);
    if (!fresh) it->second = log_add(it->second, lp);
    for (int f = lattice.frames - 1; f >= 0; --f) {
      if (++path[static_cast<std::size_t>(f)] < lattice.width()) break;
      path[static_cast<std::size_t>(f)] = 0;
    }
  }
  return dist;
}

HypothesisList exhaustive_nbest(const EmissionLattice& lattice, int n_plus_1) {
  LIPGER_REQUIRE(n_plus_1 >= 1, "exhaustive_nbest: n_plus_1 must be >= 1");
  auto dist = exhaustive_distribution(lattice);
  return top_n({dist.begin(), dist.end()}, n_plus_1);
}

double length_normalized_score(const Hypothesis& h) {
  return h.score / static_cast<double>(std::max<std::size_t>(1, h.tokens.size()));
}

Words tokens_to_words(const TokenSeq& tokens, const Words& vocab) {
  Words out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    LIPGER_REQUIRE(t >= 0 && t < static_cast<int>(vocab.size()), "tokens_to_words: id out of range");
    out.push_back(vocab[static_cast<std::size_t>(t)]);
  }
  return out;
}

TokenSeq words_to_tokens(const Words& words, const Words& vocab) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], static_cast<int>(i));
  TokenSeq out;
  for (const auto& w : words) {
    const auto it = index.find(w);
    if (it == index.end()) throw PreconditionError("word '" + w + "' is not in the vocabulary");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace lipger
