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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Oracles are written independently of the library code.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "lipger/asr.hpp"
#include "lipger/audio.hpp"
#include "lipger/checkpoint.hpp"
#include "lipger/config.hpp"
#include "lipger/corpus.hpp"
#include "lipger/eval.hpp"
#include "lipger/pipeline.hpp"
#include "lipger/selftest.hpp"
#include "lipger/trainer.hpp"
#include "lipger/wer.hpp"

namespace fs = std::filesystem;
using namespace lipger;

namespace {

// Tolerances and limits, pinned.
constexpr int kC1Lattices = 200;
constexpr double kC1RelTol = 1e-9;
constexpr double kC1Seconds = 10.0;
constexpr int kC2MaxLen = 6;
constexpr int kC2Vocab = 4;
constexpr double kC2Seconds = 30.0;
constexpr int kC3Triples = 100;
constexpr double kC3SnrTolDb = 0.01;
constexpr double kC3DeltaTol = 1e-12;
constexpr int kC4PromptLen = 15;
constexpr double kC6RelTol = 1e-4;
constexpr double kC6Step = 1e-5;
constexpr double kC6Seconds = 60.0;
constexpr int kC7Steps = 10;
constexpr int kC8Samples = 32;
constexpr int kC8MaxSteps = 200;
constexpr double kC8MaxCe = 0.1;
constexpr double kC8MinExact = 0.9;
constexpr double kC8Seconds = 300.0;
constexpr std::uint64_t kC9Seeds[] = {1, 2, 3};

const fs::path kWork = fs::temp_directory_path() / "lipger_acceptance";

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  C" << id << " " << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// Runs a criterion body, turning any exception into a failure line.
void criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(id, name, pass, detail);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

// ---- C1 -------------------------------------------------------------------

EmissionLattice random_lattice(Rng& rng, int frames, int vocab) {
  EmissionLattice lat;
  for (int i = 0; i < vocab; ++i) lat.vocab.push_back("w" + std::to_string(i));
  lat.frames = frames;
  for (int f = 0; f < frames; ++f) {
    std::vector<double> p(static_cast<std::size_t>(vocab + 1));
    double z = 0;
    for (auto& x : p) z += (x = 0.01 + rng.uniform());
    for (double x : p) lat.logp.push_back(std::log(x / z));
  }
  return lat;
}

std::pair<bool, std::string> c1() {
  Timer t;
  Rng rng(20240601);
  int mismatches = 0;
  double worst = 0;
  for (int i = 0; i < kC1Lattices; ++i) {
    const int frames = 1 + static_cast<int>(rng.index(5));
    const int vocab = 1 + static_cast<int>(rng.index(3));
    const auto lat = random_lattice(rng, frames, vocab);
    const int n = 2 + static_cast<int>(rng.index(4));
    const int paths = static_cast<int>(std::lround(std::pow(vocab + 1, frames)));
    const auto beam = ctc_prefix_beam_nbest(lat, std::max(paths, n), n);
    const auto ex = exhaustive_nbest(lat, n);
    if (beam.size() != ex.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t k = 0; k < ex.size(); ++k) {
      const double rel = std::abs(beam[k].score - ex[k].score) / std::max(1e-300, std::abs(ex[k].score));
      worst = std::max(worst, rel);
      if (beam[k].tokens != ex[k].tokens || rel > kC1RelTol) ++mismatches;
    }
  }
  const double s = t.seconds();
  return {mismatches == 0 && s < kC1Seconds,
          std::to_string(kC1Lattices) + " lattices, " + std::to_string(mismatches) + " mismatches, worst rel " +
              fmt(worst) + ", " + fmt(s) + " s"};
}

// ---- C2 -------------------------------------------------------------------

// Memoised recursive edit distance over small integer words.
struct EditOracle {
  const int* a;
  int n;
  const int* b;
  int m;
  int memo[kC2MaxLen + 1][kC2MaxLen + 1];

  int d(int i, int j) {
    int& slot = memo[i][j];
    if (slot >= 0) return slot;
    if (i == n) return slot = m - j;
    if (j == m) return slot = n - i;
    return slot = std::min({d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), d(i + 1, j) + 1, d(i, j + 1) + 1});
  }
  int run() {
    std::memset(memo, -1, sizeof(memo));
    return d(0, 0);
  }
};

std::pair<bool, std::string> c2() {
  Timer t;
  std::vector<std::vector<int>> seqs{{}};
  for (std::size_t k = 0; k < seqs.size(); ++k)
    if (static_cast<int>(seqs[k].size()) < kC2MaxLen)
      for (int w = 0; w < kC2Vocab; ++w) {
        auto s = seqs[k];
        s.push_back(w);
        seqs.push_back(std::move(s));
      }
  long long pairs = 0, bad = 0;
  EditOracle o{};
  for (const auto& r : seqs) {
    if (r.empty()) continue;
    for (const auto& h : seqs) {
      const auto c = wer_counts<int>(std::span<const int>(r), std::span<const int>(h));
      o.a = r.data();
      o.n = static_cast<int>(r.size());
      o.b = h.data();
      o.m = static_cast<int>(h.size());
      const bool consistent = c.ref_words - c.deletions + c.insertions == static_cast<long long>(h.size());
      if (c.errors() != o.run() || !consistent) ++bad;
      ++pairs;
    }
  }
  const auto worked = wer_counts(split_words("you are very kind"), split_words("you a very kind day"));
  const double s = t.seconds();
  const bool worked_ok = worked.wer() == 0.5 && worked.substitutions == 1 && worked.insertions == 1;
  return {bad == 0 && worked_ok && s < kC2Seconds,
          std::to_string(pairs) + " pairs, " + std::to_string(bad) + " mismatches, template pair WER " +
              fmt(worked.wer()) + ", " + fmt(s) + " s"};
}

// ---- C3 -------------------------------------------------------------------

std::pair<bool, std::string> c3() {
  Rng rng(77);
  double worst = 0;
  for (int i = 0; i < kC3Triples; ++i) {
    AudioClip sig, noise;
    sig.samples.resize(800 + rng.index(4000));
    noise.samples.resize(200 + rng.index(6000));
    const double amp = rng.uniform(0.01, 0.5);
    for (auto& x : sig.samples) x = amp * rng.normal();
    for (auto& x : noise.samples) x = rng.uniform(-1, 1);
    const double snr = rng.uniform(0.0, 40.0);
    const auto mix = mix_at_snr(sig, noise, snr, rng.index(noise.samples.size()));
    double ps = 0, pn = 0;
    for (std::size_t k = 0; k < sig.samples.size(); ++k) {
      ps += sig.samples[k] * sig.samples[k];
      const double d = mix.mixed.samples[k] - sig.samples[k];
      pn += d * d;
    }
    worst = std::max(worst, std::abs(10 * std::log10(ps / pn) - snr));
  }
  AudioClip clip;
  clip.samples.resize(4096);
  for (auto& x : clip.samples) x = rng.uniform(-0.9, 0.9);
  ImpulseResponse delta;
  delta.samples = {1.0};
  const auto out = convolve_ir(clip, delta);
  double dmax = 0;
  for (std::size_t k = 0; k < clip.samples.size(); ++k)
    dmax = std::max(dmax, std::abs(out.samples[k] - clip.samples[k]));
  return {worst <= kC3SnrTolDb && dmax <= kC3DeltaTol && out.samples.size() == clip.samples.size(),
          "worst SNR error " + fmt(worst) + " dB over " + std::to_string(kC3Triples) + " mixes, unit-delta max diff " +
              fmt(dmax)};
}

// ---- C4 / C5 ----------------------------------------------------------------

ModelConfig small_model(int dim, int heads, int steps, int vocab) {
  ModelConfig c = miniature_config();
  c.dim = dim;
  c.heads = heads;
  c.prompt_len = kC4PromptLen;
  c.lip.steps = steps;
  c.vocab_size = vocab;
  c.max_len = 48;
  return c;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& x : t.data) x = rng.normal();
  return t;
}

std::vector<int> random_ids(Rng& rng, int n, int vocab) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (auto& i : ids) i = static_cast<int>(rng.index(static_cast<std::size_t>(vocab)));
  return ids;
}

std::pair<bool, std::string> c4() {
  Rng rng(4);
  int bad = 0, trials = 0;
  const int dims[][2] = {{8, 2}, {12, 3}, {16, 4}, {24, 2}, {32, 4}};
  for (int t = 0; t < 12; ++t, ++trials) {
    const auto& dh = dims[rng.index(5)];
    const int V = 1 + static_cast<int>(rng.index(24));
    const int I = 1 + static_cast<int>(rng.index(30));
    const ModelConfig c = small_model(dh[0], dh[1], V, 20);
    auto p = ModelParams::init(c, rng.next_u64());
    AdapterTrace tr;
    const Tensor logits =
        adapter_forward(random_ids(rng, I, c.vocab_size), random_tensor({V, c.lip.feature_dim}, rng), p, &tr);
    const int K = kC4PromptLen, C = c.dim;
    const bool ok = tr.fused_shape == std::vector<int>{K + V, C} && tr.selected_shape == std::vector<int>{K, C} &&
                    tr.attended_shape == std::vector<int>{K + I, C} && tr.layers_applied == c.layers &&
                    logits.shape == std::vector<int>{I, c.vocab_size};
    bad += !ok;
  }
  return {bad == 0, std::to_string(trials) + " random (V, C, I) draws at K=15, " + std::to_string(bad) + " violations"};
}

std::pair<bool, std::string> c5() {
  const PipelineConfig toy = load_config(LIPGER_FIXTURES "/toy.ini");
  ModelConfig c = toy.model;
  c.vocab_size = 60;
  auto p = ModelParams::init(c, 11);
  Rng rng(5);
  double worst = 0;
  for (int t = 0; t < 5; ++t) {
    const auto ids = random_ids(rng, 1 + static_cast<int>(rng.index(40)), c.vocab_size);
    const Tensor a = base_forward(ids, p);
    const Tensor b = adapter_forward(ids, random_tensor({c.lip.steps, c.lip.feature_dim}, rng), p);
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  }
  return {worst == 0.0, "max abs logit diff " + fmt(worst) + " over 5 random inputs"};
}

// ---- C6 / C7 ----------------------------------------------------------------

TrainExample miniature_example(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  TrainExample ex;
  ex.input = random_ids(rng, 6, c.vocab_size);
  ex.target = random_ids(rng, 6, c.vocab_size);
  ex.mask = {0, 0, 1, 1, 1, 1};
  RoiSequence r;
  r.frames = 3;
  r.height = c.lip.roi_height;
  r.width = c.lip.roi_width;
  r.pixels.resize(static_cast<std::size_t>(3) * r.height * r.width);
  for (auto& x : r.pixels) x = rng.uniform();
  ex.rois = preprocess_rois(r, r.height, r.width);
  return ex;
}

std::pair<bool, std::string> c6() {
  Timer t;
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 6);
  // A non-zero gate so every trainable tensor receives gradient.
  for (auto& a : p.adapters) a.gate.value.data[0] = 0.5;
  const auto errs = gradient_check(p, miniature_example(c, 6), kC6Step, 0, 0);
  double worst = 0;
  std::string worst_name;
  for (const auto& e : errs)
    if (e.rel_err >= worst) {
      worst = e.rel_err;
      worst_name = e.name;
    }
  const double s = t.seconds();
  return {!errs.empty() && worst < kC6RelTol && s < kC6Seconds,
          std::to_string(errs.size()) + " tensors, worst rel err " + fmt(worst) + " (" + worst_name + "), " + fmt(s) +
              " s"};
}

std::pair<bool, std::string> c7() {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 7);
  std::map<std::string, Tensor> before;
  p.visit([&](const std::string& n, Parameter& t, bool) { before[n] = t.value; });
  std::vector<TrainExample> ex;
  for (int i = 0; i < 8; ++i) ex.push_back(miniature_example(c, 100 + static_cast<std::uint64_t>(i)));
  TrainConfig tc;  // default settings
  tc.batch_size = 4;
  tc.epochs = 100;
  tc.max_steps = kC7Steps;
  const auto log = train(ex, p, tc, TrainMode::kAdapter);
  int frozen_changed = 0, trainable_unchanged = 0, frozen = 0, trainable = 0;
  std::string first_bad;
  p.visit([&](const std::string& n, Parameter& t, bool is_trainable) {
    const bool same = t.value == before.at(n);
    if (is_trainable) {
      ++trainable;
      if (same) {
        ++trainable_unchanged;
        if (first_bad.empty()) first_bad = n;
      }
    } else {
      ++frozen;
      if (!same) {
        ++frozen_changed;
        if (first_bad.empty()) first_bad = n;
      }
    }
  });
  return {static_cast<int>(log.steps.size()) == kC7Steps && frozen_changed == 0 && trainable_unchanged == 0,
          std::to_string(log.steps.size()) + " steps; frozen changed " + std::to_string(frozen_changed) + "/" +
              std::to_string(frozen) + ", trainable unchanged " + std::to_string(trainable_unchanged) + "/" +
              std::to_string(trainable) + (first_bad.empty() ? "" : " (first: " + first_bad + ")")};
}

// ---- pipeline-backed criteria ---------------------------------------------------

PipelineConfig toy_config(std::uint64_t seed, const fs::path& workdir) {
  PipelineConfig cfg = load_config(LIPGER_FIXTURES "/toy.ini");
  cfg.set("run.seed", std::to_string(seed));
  cfg.set("paths.workdir", workdir.string());
  return cfg;
}

fs::path seed_dir(std::uint64_t seed) { return kWork / ("seed" + std::to_string(seed)); }

void run_pipeline(const PipelineConfig& cfg, const std::string& until = "") {
  Pipeline p(cfg, false, nullptr);
  for (const auto& s : pipeline_stages()) {
    p.run(s);
    if (s == until) break;
  }
}

std::pair<bool, std::string> c8() {
  const fs::path w = seed_dir(kC9Seeds[0]);
  const PipelineConfig cfg = toy_config(kC9Seeds[0], w);
  run_pipeline(cfg, "pretrain-lm");
  Timer t;
  auto ck = load_checkpoint((w / "pretrain-lm/base.ckpt").string());
  const Tokenizer tok = load_checkpoint_vocab((w / "pretrain-lm/base.ckpt").string());
  std::vector<LipHypRecord> used;
  std::vector<TrainExample> ex;
  for (const auto& r : read_manifest((w / "build/corpus.jsonl").string())) {
    if (r.split != Split::kTrain) continue;
    const auto rois = preprocess_rois(read_roi((w / r.roi_ref).string(), r.roi_format), cfg.model.lip.roi_height,
                                      cfg.model.lip.roi_width);
    ex.push_back(make_example(tok, render_instruction(r), rois));
    used.push_back(r);
    if (static_cast<int>(ex.size()) == kC8Samples) break;
  }
  TrainConfig tc;  // lr 5e-3, wd 0.02, batch 32
  tc.epochs = kC8MaxSteps;
  tc.max_steps = kC8MaxSteps;
  const auto log = train(ex, ck.params, tc, TrainMode::kAdapter);
  const double ce = mean_loss(ex, ck.params, TrainMode::kAdapter);
  int exact = 0;
  for (std::size_t i = 0; i < used.size(); ++i) {
    const Tensor e = encode_lips(*ex[i].rois, ck.params.lip);
    exact += correct(used[i], e, ck.params, tok, cfg.max_new) == used[i].transcript;
  }
  const double s = t.seconds();
  const double rate = static_cast<double>(exact) / static_cast<double>(used.size());
  return {static_cast<int>(used.size()) == kC8Samples && ce < kC8MaxCe && rate >= kC8MinExact && s < kC8Seconds,
          std::to_string(log.steps.size()) + " steps, final CE " + fmt(ce) + ", exact match " + std::to_string(exact) +
              "/" + std::to_string(used.size()) + ", " + fmt(s) + " s"};
}

std::map<std::string, double> report_wers(const fs::path& w) {
  std::ifstream in(w / "eval/report.json");
  const json j = json::parse(in);
  std::map<std::string, double> out;
  for (const auto& s : j.at("systems")) out[s.at("system").get<std::string>()] = s.at("wer").get<double>();
  return out;
}

std::pair<bool, std::string> c9() {
  bool ok = true;
  std::string detail;
  for (const std::uint64_t seed : kC9Seeds) {
    Timer t;
    run_pipeline(toy_config(seed, seed_dir(seed)));
    const auto w = report_wers(seed_dir(seed));
    const double ob = w.at("onebest"), ger = w.at("ger"), lip = w.at("lipger");
    const bool pass = lip < ger && ger < ob && lip < ob;
    ok = ok && pass;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": onebest " +
              fmt(100 * ob, 4) + "% lm " + fmt(100 * w.at("lm_rescore"), 4) + "% ger " + fmt(100 * ger, 4) +
              "% lipger " + fmt(100 * lip, 4) + "% (" + fmt(t.seconds(), 3) + " s)";
  }
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("missing " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<bool, std::string> c10() {
  CorruptionProvenance p;
  p.spec.seed = 3;
  const auto r = build_record(split_words("you are very kind"),
                              {{split_words("you a very kind day"), -1.0, 0},
                               {split_words("you are very kind day"), -2.0, 1},
                               {split_words("you have very kind day"), -3.0, 2}},
                              "a.wav", "roi.bin", p, Split::kTrain);
  const auto s = render_instruction(r);
  const std::string golden = slurp(LIPGER_TEST_FIXTURES "/instruction_golden.txt");
  const bool wording = s.prompt.find("Please try to revise it using the words that are only included in the "
                                     "other-hypothesis") != std::string::npos;
  return {s.prompt == golden && s.response == "you are very kind" && wording,
          "prompt " + std::string(s.prompt == golden ? "matches" : "differs from") + " golden file (" +
              std::to_string(golden.size()) + " bytes)"};
}

std::pair<bool, std::string> c11() {
  const std::uint64_t seed = kC9Seeds[0];
  const fs::path a = seed_dir(seed), b = kWork / "replay";
  fs::remove_all(b);
  run_pipeline(toy_config(seed, a));
  run_pipeline(toy_config(seed, b));
  const char* artifacts[] = {"simulate/manifest.jsonl", "decode/nbest.jsonl",  "build/corpus.jsonl",
                             "build/instructions.jsonl", "pretrain-lm/base.ckpt", "train/model.ckpt",
                             "eval/report.json",        "eval/report.txt",       "report/summary.json"};
  int differing = 0;
  std::string first;
  for (const char* f : artifacts)
    if (slurp(a / f) != slurp(b / f)) {
      ++differing;
      if (first.empty()) first = f;
    }
  return {differing == 0, std::to_string(std::size(artifacts) - differing) + "/" + std::to_string(std::size(artifacts)) +
                              " artifacts bit-identical" + (first.empty() ? "" : " (first difference: " + first + ")")};
}

}  // namespace

int main() {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  criterion(1, "beam search matches exhaustive enumeration", c1);
  criterion(2, "WER matches recursive edit-distance oracle", c2);
  criterion(3, "SNR accuracy and unit-delta reverb", c3);
  criterion(4, "adapter shapes at K=15", c4);
  criterion(5, "zero-gate equivalence", c5);
  criterion(6, "finite-difference gradient check", c6);
  criterion(7, "frozen partition after 10 steps", c7);
  criterion(8, "overfit 32 toy samples", c8);
  criterion(9, "lipger < ger < onebest on 3 seeds", c9);
  criterion(10, "instruction template golden file", c10);
  criterion(11, "bit-identical pipeline replay", c11);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
