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

#ifndef LIPGER_TOY_CORPUS_HPP_
#define LIPGER_TOY_CORPUS_HPP_

// Synthetic corpus with zero external data.
//
// 50 words in 5 slots of 10; each slot holds 5 acoustically confusable pairs.
// A sentence takes one word per slot. Every word is acoustically confusable
// with its pair partner (same slot, only the lips tell them apart) and with a
// "twin" in the next slot (the slot grammar tells them apart). ROI frames draw
// a mouth whose opening encodes the pair member.

#include <cstdint>
#include <string>
#include <vector>

#include "lipger/asr.hpp"
#include "lipger/audio.hpp"
#include "lipger/corpus.hpp"
#include "lipger/lip_encoder.hpp"

namespace lipger {

struct ToyLexicon {
  Words vocab;
  int slots = 5;
  std::vector<int> slot;     // per word
  std::vector<int> pair;     // pair index within the slot
  std::vector<int> member;   // 0 or 1 within the pair
  std::vector<int> partner;  // same slot, other member
  std::vector<int> twin;     // next slot, same pair and member

  ConfusionSets confusions() const;
  int word(int s, int p, int m) const { return s * 10 + p * 2 + m; }
};

const ToyLexicon& toy_lexicon();

struct ToyCorpusOptions {
  int utterances = 400;
  int roi_size = 24;
  int frames_per_word = 3;
  double word_seconds = 0.24;
  int sample_rate_hz = 16000;
  int noise_clips = 3;
  int interferer_clips = 3;
  int irs = 2;
  double roi_noise = 0.04;
  std::uint64_t seed = 0;
};

// Token ids of one sentence.
TokenSeq toy_sentence(Rng& rng);
AudioClip toy_speech(const TokenSeq& words, const ToyCorpusOptions& opts, std::uint64_t seed);
RoiSequence toy_rois(const TokenSeq& words, const ToyCorpusOptions& opts, std::uint64_t seed);

// One source utterance, paths relative to the source directory.
struct SourceItem {
  std::string id;
  Words transcript;
  std::string audio_ref;
  std::string roi_ref;
  std::string roi_format = "raw";
};

json source_item_to_json(const SourceItem& s);
SourceItem source_item_from_json(const json& j);

// Writes clean audio, ROI files, noise pools and source.jsonl under `dir`:
//   dir/clean/<id>.wav  dir/roi/<id>.roi  dir/pools/{noise,interferer,ir}/*.wav
//   dir/source.jsonl    dir/confusions.json
void materialize_toy_source(const std::string& dir, const ToyCorpusOptions& opts);

NoisePools load_pools(const std::string& pools_dir);
void write_confusions(const std::string& path, const Words& vocab, const ConfusionSets& sets);
// Returns the vocabulary and fills `sets`.
Words read_confusions(const std::string& path, ConfusionSets& sets);

// Combined SNR of background noise and interferer (power sum).
double effective_snr_db(const CorruptionProvenance& p);
// Linear in SNR between the two anchors, clamped to them.
double confusion_strength_for_snr(double snr_db, double at_0db, double at_40db);

}  // namespace lipger

#endif  // LIPGER_TOY_CORPUS_HPP_
