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

#include "lipger/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "lipger/asr.hpp"
#include "lipger/wer.hpp"

namespace lipger {

namespace {

EmissionLattice random_lattice(Rng& rng, int frames, int vocab) {
  EmissionLattice lat;
  for (int v = 0; v < vocab; ++v) lat.vocab.push_back(std::string(1, static_cast<char>('a' + v)));
  lat.frames = frames;
  const int w = vocab + 1;
  lat.logp.resize(static_cast<std::size_t>(frames * w));
  for (int f = 0; f < frames; ++f) {
    double z = 0.0;
    std::vector<double> p(static_cast<std::size_t>(w));
    for (auto& x : p) z += (x = 0.05 + rng.uniform());
    for (int s = 0; s < w; ++s) lat.at(f, s) = std::log(p[static_cast<std::size_t>(s)] / z);
  }
  return lat;
}

SuiteResult beam_suite() {
  Rng rng(derive_seed(1, "selftest/beam"));
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const int frames = 1 + static_cast<int>(rng.index(5));
    const int vocab = 1 + static_cast<int>(rng.index(3));
    const EmissionLattice lat = random_lattice(rng, frames, vocab);
    const int paths = static_cast<int>(std::pow(vocab + 1, frames));
    const auto ex = exhaustive_nbest(lat, 5);
    const auto bs = ctc_prefix_beam_nbest(lat, std::max(paths, 5), 5);
    bool same = ex.size() == bs.size() && ex.complete == bs.complete;
    for (std::size_t i = 0; same && i < ex.size(); ++i)
      same = ex[i].tokens == bs[i].tokens &&
             std::abs(ex[i].score - bs[i].score) <= 1e-9 * std::max(1.0, std::abs(ex[i].score));
    bad += !same;
  }
  return {"beam-vs-exhaustive", bad == 0, std::to_string(200 - bad) + "/200 lattices agree"};
}

// Plain recursive edit distance, exponential.
int edit_distance(const std::vector<int>& a, std::size_t i, const std::vector<int>& b, std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  return std::min({edit_distance(a, i + 1, b, j + 1) + (a[i] != b[j]), edit_distance(a, i, b, j + 1) + 1,
                   edit_distance(a, i + 1, b, j) + 1});
}

SuiteResult wer_suite() {
  std::vector<std::vector<int>> seqs{{}};
  for (std::size_t k = 0; k < seqs.size(); ++k)
    if (seqs[k].size() < 4)
      for (int w = 0; w < 3; ++w) {
        auto s = seqs[k];
        s.push_back(w);
        seqs.push_back(s);
      }
  long bad = 0, pairs = 0;
  for (const auto& r : seqs) {
    if (r.empty()) continue;
    for (const auto& h : seqs) {
      const WerCounts c = wer_counts<int>(r, h);
      bad += c.errors() != edit_distance(r, 0, h, 0);
      ++pairs;
    }
  }
  const WerCounts worked = wer_counts(split_words("you are very kind"), split_words("you a very kind day"));
  const bool ok = bad == 0 && worked.wer() == 0.5 && worked.substitutions == 1 && worked.insertions == 1;
  return {"wer-oracle", ok,
          std::to_string(pairs - bad) + "/" + std::to_string(pairs) + " pairs agree; template pair WER " +
              std::to_string(worked.wer())};
}

double example_loss(ModelParams& params, const TrainExample& ex) {
  std::vector<TrainExample> one{ex};
  return mean_loss(one, params, TrainMode::kAdapter);
}

SuiteResult grad_suite() {
  ModelConfig cfg = miniature_config();
  ModelParams params = ModelParams::init(cfg, 7);
  Rng rng(derive_seed(7, "selftest/grad"));
  for (auto& a : params.adapters) a.gate.value.data[0] = rng.uniform(0.3, 0.8);
  TrainExample ex;
  for (int i = 0; i < 7; ++i) {
    ex.input.push_back(static_cast<int>(rng.index(12)));
    ex.target.push_back(static_cast<int>(rng.index(12)));
    ex.mask.push_back(i >= 2);
  }
  PreparedRois rois;
  rois.frames = 5;
  rois.height = cfg.lip.roi_height;
  rois.width = cfg.lip.roi_width;
  for (int i = 0; i < rois.frames * rois.height * rois.width; ++i) rois.pixels.push_back(rng.normal());
  ex.rois = rois;
  const auto errs = gradient_check(params, ex, 1e-5, 24, 11);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& e : errs)
    if (e.rel_err >= worst) {
      worst = e.rel_err;
      worst_name = e.name;
    }
  std::ostringstream d;
  d << errs.size() << " tensors, worst rel. err " << worst << " (" << worst_name << ")";
  return {"gradient-check", worst < 1e-4 && !errs.empty(), d.str()};
}

}  // namespace

ModelConfig miniature_config() {
  ModelConfig c;
  c.vocab_size = 12;
  c.dim = 16;
  c.layers = 2;
  c.heads = 2;
  c.ff_mult = 2;
  c.max_len = 16;
  c.prompt_len = 4;
  c.encoder_layers = 1;
  c.lip.roi_height = c.lip.roi_width = 8;
  c.lip.stem_channels = 4;
  c.lip.stem_kernel_t = 3;
  c.lip.stem_kernel_hw = 3;
  c.lip.blocks = 1;
  c.lip.tcn_levels = 1;
  c.lip.tcn_kernel = 3;
  c.lip.feature_dim = 8;
  c.lip.steps = 6;
  return c;
}

std::vector<TensorGradError> gradient_check(ModelParams& params, const TrainExample& ex, double h,
                                            std::size_t max_elems, std::uint64_t seed) {
  params.enable_adapter_training();
  params.zero_grads();
  batch_loss_and_grad({&ex}, params, TrainMode::kAdapter);
  Rng rng(seed);
  std::vector<TensorGradError> out;
  params.visit([&](const std::string& name, Parameter& p, bool trainable) {
    if (!trainable) return;
    std::vector<std::size_t> idx(p.value.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (max_elems > 0 && idx.size() > max_elems) {
      rng.shuffle(idx);
      idx.resize(max_elems);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i : idx) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double up = example_loss(params, ex);
      p.value.data[i] = orig - h;
      const double down = example_loss(params, ex);
      p.value.data[i] = orig;
      const double num = (up - down) / (2.0 * h);
      const double ana = p.grad.data[i];
      diff += (ana - num) * (ana - num);
      na += ana * ana;
      nn += num * num;
    }
    const double denom = std::max(std::sqrt(std::max(na, nn)), 1e-12);
    out.push_back({name, std::sqrt(diff) / denom});
  });
  params.disable_grads();
  return out;
}

std::vector<SuiteResult> run_selftest(std::ostream* log) {
  std::vector<SuiteResult> out;
  for (const auto& suite : {std::function<SuiteResult()>(beam_suite), std::function<SuiteResult()>(wer_suite),
                            std::function<SuiteResult()>(grad_suite)}) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r = suite();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log != nullptr) *log << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << s << " s]\n";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lipger
