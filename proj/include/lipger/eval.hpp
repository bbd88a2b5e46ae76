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

#ifndef LIPGER_EVAL_HPP_
#define LIPGER_EVAL_HPP_

// System comparison over a test split: 1-best, LM rescoring, text-only
// error correction and lip-conditioned error correction.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipger/corpus.hpp"
#include "lipger/model.hpp"
#include "lipger/tokenizer.hpp"
#include "lipger/wer.hpp"

namespace lipger {

inline const std::vector<std::string> kAllSystems = {"onebest", "lm_rescore", "ger", "lipger"};

// Accepts "lm" as an alias of "lm_rescore". Output keeps kAllSystems order.
std::vector<std::string> parse_systems(std::string_view csv);

// Index of argmax over (lm_mean[i] + asr_mean[i]) / 2; ties go to the lower index.
std::size_t rescore_choose(std::span<const double> lm_mean, std::span<const double> asr_mean);

// ASR score per word (words + 0 for an empty hypothesis counts as one).
double asr_per_token(const TextHypothesis& h);
// Mean log-probability per predicted token of "BOS words EOS".
double lm_per_token(const Words& words, ModelParams& lm, const Tokenizer& tok);

const TextHypothesis& lm_rescore_choose(const LipHypRecord& record, ModelParams& lm, const Tokenizer& tok);

// Greedy correction. Without a lip feature this is the text-only system.
Words correct(const LipHypRecord& record, const std::optional<Tensor>& lip_feature, ModelParams& model,
              const Tokenizer& tok, int max_new);

struct RecordEval {
  std::string id;
  Words reference;
  std::map<std::string, Words> outputs;  // per system; absent if skipped
};

struct EvalReport {
  std::vector<std::string> systems;
  std::map<std::string, WerCounts> totals;
  std::map<std::string, int> skipped;
  std::vector<RecordEval> records;
  json config = json::object();

  double wer(const std::string& system) const { return totals.at(system).wer(); }
  json to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  std::vector<std::string> systems = kAllSystems;
  int max_new = 24;
  // Base directory for relative ROI references.
  std::string data_root;
};

// Runs every requested system over the test-split records. `model` and
// `tok` are required for all systems but onebest. Records whose ROI cannot be
// read are skipped for lipger and counted.
EvalReport evaluate_systems(const std::vector<LipHypRecord>& manifest, ModelParams* model, const Tokenizer* tok,
                            const EvalOptions& options);

// Relative WER change of every system against onebest.
json summarize_report(const json& report);
std::string summary_table(const json& summary);

}  // namespace lipger

#endif  // LIPGER_EVAL_HPP_
