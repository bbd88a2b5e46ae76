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

#ifndef LIPGER_CONFIG_HPP_
#define LIPGER_CONFIG_HPP_

// Pipeline configuration: an INI file with sections; "section.key=value"
// overrides from the command line go through the same validation.

#include <cstdint>
#include <string>
#include <vector>

#include "lipger/audio.hpp"
#include "lipger/corpus.hpp"
#include "lipger/model.hpp"
#include "lipger/toy_corpus.hpp"
#include "lipger/trainer.hpp"

namespace lipger {

struct DecodeSettings {
  int beam_width = 16;
  int n_plus_1 = 5;
  double strength_at_0db = 0.6;
  double strength_at_40db = 0.05;
  double floor_mass = 0.02;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string workdir = "work";
  std::string source = "toy";  // "toy" or a directory holding source.jsonl
  std::string pools;           // defaults to <source>/pools
  ToyCorpusOptions toy;
  CorruptionRanges simulate;
  DecodeSettings decode;
  double train_ratio = 0.8;
  bool check_refs = true;
  ModelConfig model;  // vocab_size is filled from the tokenizer
  TrainConfig pretrain;
  TrainConfig train;
  double pretrain_text_weight = 1.0;  // plain sentences per instruction sample
  // Share of train-split records given to the base LM; adapters train on the rest.
  double pretrain_record_share = 0.5;
  std::vector<std::string> systems = {"onebest", "lm_rescore", "ger", "lipger"};
  int max_new = 24;

  PipelineConfig();

  // "section.key" -> value. Unknown keys and bad values throw PreconditionError.
  void set(const std::string& key, const std::string& value);
  std::vector<std::string> keys() const;
  void validate() const;

  // Resolved settings of one section, or all of them.
  json section_json(const std::string& section) const;
  json to_json() const;
};

PipelineConfig load_config(const std::string& path);
// Applies "section.key=value" strings.
void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace lipger

#endif  // LIPGER_CONFIG_HPP_
