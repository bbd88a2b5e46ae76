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

#ifndef LIPGER_CORPUS_HPP_
#define LIPGER_CORPUS_HPP_

// Hypothesis-list records, their JSON-lines manifest, and the instruction
// template used for error-correction fine-tuning.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lipger/asr.hpp"
#include "lipger/audio.hpp"
#include "lipger/common.hpp"

namespace lipger {

using json = nlohmann::ordered_json;

enum class Split { kTrain, kTest };
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct TextHypothesis {
  Words words;
  double score = 0.0;
  int rank = 0;

  bool operator==(const TextHypothesis&) const = default;
};

struct LipHypRecord {
  std::string id;
  Words transcript;
  std::vector<TextHypothesis> hypotheses;  // rank 0 is the 1-best
  bool complete = true;                    // false if the decoder ran out of distinct sequences
  std::string audio_ref;
  std::string roi_ref;
  std::string roi_format = "raw";          // "raw" tensor file or "png" frame directory
  CorruptionProvenance corruption;
  Split split = Split::kTrain;

  bool operator==(const LipHypRecord&) const = default;
};

struct InstructionSample {
  std::string prompt;
  std::string response;
  std::string record_id;
};

// The first template line, verbatim.
extern const char* const kInstructionHeader;

std::vector<TextHypothesis> to_text_hypotheses(const HypothesisList& list, const Words& vocab);

// Normalises text, validates invariants and assigns the content-hash id.
LipHypRecord build_record(const Words& transcript, const std::vector<TextHypothesis>& hypotheses,
                          const std::string& audio_ref, const std::string& roi_ref,
                          const CorruptionProvenance& corruption, Split split);

std::string record_content_id(const Words& transcript, const std::vector<TextHypothesis>& hypotheses,
                              std::uint64_t corruption_seed);

// Deterministic split from the id hash; train_ratio in [0, 1].
Split assign_split(std::string_view id, double train_ratio);

// Accumulates records and rejects duplicate ids.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(bool check_refs = false) : check_refs_(check_refs) {}

  const LipHypRecord& add(LipHypRecord record);
  const std::vector<LipHypRecord>& records() const { return records_; }

 private:
  bool check_refs_;
  std::set<std::string> ids_;
  std::vector<LipHypRecord> records_;
};

InstructionSample render_instruction(const LipHypRecord& record);

json provenance_to_json(const CorruptionProvenance& p);
CorruptionProvenance provenance_from_json(const json& j);
json record_to_json(const LipHypRecord& r);
LipHypRecord record_from_json(const json& j);

json lattice_to_json(const EmissionLattice& lat, bool include_vocab);
EmissionLattice lattice_from_json(const json& j, const Words& vocab);

void write_manifest(const std::vector<LipHypRecord>& records, const std::string& path);
std::vector<LipHypRecord> read_manifest(const std::string& path);

// Generic JSON-lines helpers shared by the pipeline stages.
void write_jsonl(const std::vector<json>& rows, const std::string& path);
std::vector<json> read_jsonl(const std::string& path);

}  // namespace lipger

#endif  // LIPGER_CORPUS_HPP_
