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

#include "lipger/toy_corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace lipger {

namespace fs = std::filesystem;

namespace {

ToyLexicon make_lexicon() {
  ToyLexicon lex;
  lex.vocab = {
      "bat",  "pat",   "dog",   "dock",  "man",   "van",   "king",  "kin",   "bird",  "word",
      "sees", "seeds", "finds", "fines", "takes", "tapes", "moves", "proves", "likes", "bikes",
      "red",  "wed",   "blue",  "glue",  "green", "grain", "gold",  "cold",  "white", "wide",
      "ball", "wall",  "box",   "fox",   "cup",   "cub",   "hat",   "mat",   "ring",  "wing",
      "home", "foam",  "town",  "gown",  "park",  "bark",  "lake",  "rake",  "farm",  "harm",
  };
  const int n = static_cast<int>(lex.vocab.size());
  for (int w = 0; w < n; ++w) {
    const int s = w / 10, p = (w % 10) / 2, m = w % 2;
    lex.slot.push_back(s);
    lex.pair.push_back(p);
    lex.member.push_back(m);
    lex.partner.push_back(lex.word(s, p, 1 - m));
    lex.twin.push_back(lex.word((s + 1) % lex.slots, p, m));
  }
  return lex;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

AudioClip colored_noise(std::size_t n, double pole, int rate, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(n);
  double y = 0.0;
  for (auto& s : c.samples) {
    y = pole * y + (1.0 - pole) * rng.normal();
    s = 0.2 * y;
  }
  return c;
}

}  // namespace

const ToyLexicon& toy_lexicon() {
  static const ToyLexicon lex = make_lexicon();
  return lex;
}

ConfusionSets ToyLexicon::confusions() const {
  ConfusionSets sets(vocab.size());
  for (std::size_t w = 0; w < vocab.size(); ++w) sets[w] = {partner[w], twin[w]};
  return sets;
}

TokenSeq toy_sentence(Rng& rng) {
  const auto& lex = toy_lexicon();
  TokenSeq out;
  for (int s = 0; s < lex.slots; ++s) out.push_back(s * 10 + static_cast<int>(rng.index(10)));
  return out;
}

AudioClip toy_speech(const TokenSeq& words, const ToyCorpusOptions& opts, std::uint64_t seed) {
  const auto& lex = toy_lexicon();
  Rng rng(seed);
  const auto seg = static_cast<std::size_t>(opts.word_seconds * opts.sample_rate_hz);
  AudioClip c;
  c.sample_rate_hz = opts.sample_rate_hz;
  c.samples.assign(seg * words.size(), 0.0);
  for (std::size_t k = 0; k < words.size(); ++k) {
    const int w = words[k];
    // Pair partners sit 8 Hz apart; twins share a pair index across slots.
    const double f0 = 140.0 + 25.0 * lex.pair[static_cast<std::size_t>(w)] + 7.0 * lex.slot[static_cast<std::size_t>(w)] +
                      8.0 * lex.member[static_cast<std::size_t>(w)];
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < seg; ++i) {
      const double t = static_cast<double>(i) / opts.sample_rate_hz;
      const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
      const double a = 2.0 * std::numbers::pi * f0 * t + phase;
      c.samples[k * seg + i] = 0.3 * env * (std::sin(a) + 0.4 * std::sin(2.0 * a));
    }
  }
  return c;
}

RoiSequence toy_rois(const TokenSeq& words, const ToyCorpusOptions& opts, std::uint64_t seed) {
  const auto& lex = toy_lexicon();
  Rng rng(seed);
  RoiSequence r;
  r.height = r.width = opts.roi_size;
  r.frames = static_cast<int>(words.size()) * opts.frames_per_word;
  r.frame_rate_hz = opts.frames_per_word / opts.word_seconds;
  r.pixels.assign(static_cast<std::size_t>(r.frames) * r.height * r.width, 0.0);
  const double size = opts.roi_size;
  for (int m = 0; m < r.frames; ++m) {
    const int w = words[static_cast<std::size_t>(m / opts.frames_per_word)];
    const int j = m % opts.frames_per_word;
    const double mid = 0.5 * (opts.frames_per_word - 1);
    const double phase = 1.0 - 0.25 * std::abs(j - mid) / std::max(1.0, mid);
    const double open = (lex.member[static_cast<std::size_t>(w)] ? 0.30 : 0.11) * phase + 0.015 * rng.normal();
    const double half_w = (0.26 + 0.02 * lex.pair[static_cast<std::size_t>(w)]) * size;
    const double half_h = std::max(0.02, open) * size;
    const double cx = 0.5 * size + rng.uniform(-0.8, 0.8);
    const double cy = 0.55 * size + rng.uniform(-0.8, 0.8);
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x) {
        const double dx = (x + 0.5 - cx) / half_w, dy = (y + 0.5 - cy) / half_h;
        const double skin = 0.62 + 0.08 * (y + 0.5) / size;
        double v = dx * dx + dy * dy <= 1.0 ? 0.12 : skin;
        v += opts.roi_noise * rng.normal();
        r.pixels[(static_cast<std::size_t>(m) * r.height + y) * r.width + x] = std::clamp(v, 0.0, 1.0);
      }
  }
  return r;
}

json source_item_to_json(const SourceItem& s) {
  json j = json::object();
  j["id"] = s.id;
  j["transcript"] = join_words(s.transcript);
  j["audio"] = s.audio_ref;
  j["roi"] = s.roi_ref;
  j["roi_format"] = s.roi_format;
  return j;
}

SourceItem source_item_from_json(const json& j) {
  SourceItem s;
  s.id = j.at("id").get<std::string>();
  s.transcript = split_words(normalize_text(j.at("transcript").get<std::string>()));
  s.audio_ref = j.at("audio").get<std::string>();
  s.roi_ref = j.value("roi", std::string());
  s.roi_format = j.value("roi_format", std::string("raw"));
  return s;
}

void write_confusions(const std::string& path, const Words& vocab, const ConfusionSets& sets) {
  json j = json::object();
  j["vocab"] = vocab;
  j["confusions"] = sets;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
}

Words read_confusions(const std::string& path, ConfusionSets& sets) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  try {
    const json j = json::parse(in);
    Words vocab = j.at("vocab").get<Words>();
    sets = j.at("confusions").get<ConfusionSets>();
    if (sets.size() != vocab.size()) throw DataError(path + ": confusion table does not match the vocabulary");
    for (const auto& s : sets)
      for (int t : s)
        if (t < 0 || t >= static_cast<int>(vocab.size())) throw DataError(path + ": confusion id out of range");
    return vocab;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void materialize_toy_source(const std::string& dir, const ToyCorpusOptions& opts) {
  LIPGER_REQUIRE(opts.utterances >= 1, "toy corpus: utterances must be >= 1");
  LIPGER_REQUIRE(opts.roi_size >= 8 && opts.frames_per_word >= 1 && opts.word_seconds > 0.0,
                 "toy corpus: bad ROI or timing options");
  const fs::path root(dir);
  for (const char* sub : {"clean", "roi", "pools/noise", "pools/interferer", "pools/ir"}) ensure_dir(root / sub);
  const auto& lex = toy_lexicon();

  Rng rng(derive_seed(opts.seed, "toy/sentences"));
  std::vector<json> rows;
  for (int u = 0; u < opts.utterances; ++u) {
    char id[32];
    std::snprintf(id, sizeof id, "utt%05d", u);
    const TokenSeq words = toy_sentence(rng);
    const std::uint64_t s = derive_seed(opts.seed, id);
    SourceItem item;
    item.id = id;
    item.transcript = tokens_to_words(words, lex.vocab);
    item.audio_ref = "clean/" + item.id + ".wav";
    item.roi_ref = "roi/" + item.id + ".roi";
    write_wav((root / item.audio_ref).string(), toy_speech(words, opts, derive_seed(s, "speech")));
    write_roi_raw((root / item.roi_ref).string(), toy_rois(words, opts, derive_seed(s, "roi")));
    rows.push_back(source_item_to_json(item));
  }
  write_jsonl(rows, (root / "source.jsonl").string());
  write_confusions((root / "confusions.json").string(), lex.vocab, lex.confusions());

  const auto pool_len = static_cast<std::size_t>(3 * opts.sample_rate_hz);
  for (int i = 0; i < opts.noise_clips; ++i)
    write_wav((root / "pools/noise" / ("noise" + std::to_string(i) + ".wav")).string(),
              colored_noise(pool_len, 0.3 + 0.25 * i, opts.sample_rate_hz, derive_seed(opts.seed, "noise" + std::to_string(i))));
  Rng irng(derive_seed(opts.seed, "toy/interferers"));
  for (int i = 0; i < opts.interferer_clips; ++i) {
    TokenSeq words;
    for (int k = 0; k < 3; ++k) {
      const TokenSeq s = toy_sentence(irng);
      words.insert(words.end(), s.begin(), s.end());
    }
    write_wav((root / "pools/interferer" / ("talker" + std::to_string(i) + ".wav")).string(),
              toy_speech(words, opts, derive_seed(opts.seed, "talker" + std::to_string(i))));
  }
  for (int i = 0; i < opts.irs; ++i) {
    const ImpulseResponse ir =
        synthetic_ir(0.1 + 0.15 * i, opts.sample_rate_hz, derive_seed(opts.seed, "ir" + std::to_string(i)), 0.3);
    write_wav((root / "pools/ir" / ("room" + std::to_string(i) + ".wav")).string(),
              AudioClip{ir.samples, ir.sample_rate_hz});
  }
}

NoisePools load_pools(const std::string& pools_dir) {
  NoisePools pools;
  const fs::path root(pools_dir);
  auto each = [&](const char* sub, auto&& fn) {
    const fs::path d = root / sub;
    if (!fs::exists(d)) return;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d))
      if (e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) fn(f.stem().string(), read_wav(f.string()));
  };
  each("noise", [&](const std::string& id, AudioClip c) { pools.noises.emplace(id, std::move(c)); });
  each("interferer", [&](const std::string& id, AudioClip c) { pools.interferers.emplace(id, std::move(c)); });
  each("ir", [&](const std::string& id, AudioClip c) {
    pools.irs.emplace(id, ImpulseResponse{std::move(c.samples), c.sample_rate_hz});
  });
  return pools;
}

double effective_snr_db(const CorruptionProvenance& p) {
  double inv = 0.0;
  if (p.spec.noise_id) {
    const double b = p.measured_snr_db_background.value_or(p.spec.snr_db_background);
    inv += std::pow(10.0, -b / 10.0);
  }
  if (p.spec.interferer_id) inv += std::pow(10.0, -p.spec.snr_db_interferer / 10.0);
  return inv > 0.0 ? -10.0 * std::log10(inv) : 40.0;
}

double confusion_strength_for_snr(double snr_db, double at_0db, double at_40db) {
  const double t = std::clamp(snr_db / 40.0, 0.0, 1.0);
  return at_0db + (at_40db - at_0db) * t;
}

}  // namespace lipger
