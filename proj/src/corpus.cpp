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

#include "lipger/corpus.hpp"

#include <filesystem>
#include <fstream>

namespace lipger {

const char* const kInstructionHeader =
    "Below is the best-hypotheses transcribed from a speech recognition system. Please try to revise it using the "
    "words that are only included in the other-hypothesis, and write the response for the true transcription.";

std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(s) + "'");
}

namespace {

Words normalize_words(const Words& words) {
  Words out;
  for (const auto& w : words)
    for (auto& piece : split_words(normalize_text(w))) out.push_back(std::move(piece));
  return out;
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::vector<TextHypothesis> to_text_hypotheses(const HypothesisList& list, const Words& vocab) {
  std::vector<TextHypothesis> out;
  for (const auto& h : list.hypotheses) out.push_back({tokens_to_words(h.tokens, vocab), h.score, h.rank});
  return out;
}

std::string record_content_id(const Words& transcript, const std::vector<TextHypothesis>& hypotheses,
                              std::uint64_t corruption_seed) {
  std::string key = join_words(transcript);
  for (const auto& h : hypotheses) {
    key.push_back('\x1e');
    key += join_words(h.words);
  }
  key.push_back('\x1f');
  key += std::to_string(corruption_seed);
  return hex64(fnv1a(key));
}

LipHypRecord build_record(const Words& transcript, const std::vector<TextHypothesis>& hypotheses,
                          const std::string& audio_ref, const std::string& roi_ref,
                          const CorruptionProvenance& corruption, Split split) {
  LipHypRecord r;
  r.transcript = normalize_words(transcript);
  if (r.transcript.empty()) throw PreconditionError("build_record: empty transcript");
  if (hypotheses.size() < 2)
    throw PreconditionError("build_record: hypothesis list needs at least 2 entries, got " +
                            std::to_string(hypotheses.size()));
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    TextHypothesis h = hypotheses[i];
    h.words = normalize_words(h.words);
    h.rank = static_cast<int>(i);
    if (i > 0 && h.score > r.hypotheses.back().score)
      throw PreconditionError("build_record: hypotheses must be sorted by descending score");
    r.hypotheses.push_back(std::move(h));
  }
  r.audio_ref = audio_ref;
  r.roi_ref = roi_ref;
  r.corruption = corruption;
  r.split = split;
  r.id = record_content_id(r.transcript, r.hypotheses, corruption.spec.seed);
  return r;
}

Split assign_split(std::string_view id, double train_ratio) {
  LIPGER_REQUIRE(train_ratio >= 0.0 && train_ratio <= 1.0, "assign_split: ratio must lie in [0, 1]");
  const double u = static_cast<double>(fnv1a(id) % 10000ULL) / 10000.0;
  return u < train_ratio ? Split::kTrain : Split::kTest;
}

const LipHypRecord& CorpusBuilder::add(LipHypRecord record) {
  if (!ids_.insert(record.id).second) throw DataError("duplicate record id " + record.id);
  if (check_refs_) {
    if (!std::filesystem::exists(record.audio_ref))
      throw DataError("record " + record.id + ": audio_ref does not resolve: " + record.audio_ref);
    if (!std::filesystem::exists(record.roi_ref))
      throw DataError("record " + record.id + ": roi_ref does not resolve: " + record.roi_ref);
  }
  records_.push_back(std::move(record));
  return records_.back();
}

InstructionSample render_instruction(const LipHypRecord& record) {
  LIPGER_REQUIRE(record.hypotheses.size() >= 2, "render_instruction: record needs at least 2 hypotheses");
  LIPGER_REQUIRE(!record.transcript.empty(), "render_instruction: empty transcript");
  std::string others;
  for (std::size_t i = 1; i < record.hypotheses.size(); ++i) {
    if (i > 1) others += ", ";
    others += join_words(record.hypotheses[i].words);
  }
  InstructionSample s;
  s.prompt = std::string(kInstructionHeader) + "\n\nBest-hypothesis: " + join_words(record.hypotheses[0].words) +
             "\n\nOther-hypotheses: " + others + "\n\nResponse: ";
  s.response = join_words(record.transcript);
  s.record_id = record.id;
  return s;
}

json provenance_to_json(const CorruptionProvenance& p) {
  json j;
  j["seed"] = p.spec.seed;
  j["ir_id"] = p.spec.ir_id ? json(*p.spec.ir_id) : json(nullptr);
  j["interferer_id"] = p.spec.interferer_id ? json(*p.spec.interferer_id) : json(nullptr);
  j["noise_id"] = p.spec.noise_id ? json(*p.spec.noise_id) : json(nullptr);
  j["snr_db_background"] = p.spec.snr_db_background;
  j["snr_db_interferer"] = p.spec.snr_db_interferer;
  j["interferer_offset"] = p.interferer_offset;
  j["noise_offset"] = p.noise_offset;
  j["interferer_scale"] = p.interferer_scale;
  j["noise_scale"] = p.noise_scale;
  j["peak_rescale"] = p.peak_rescale;
  j["measured_snr_db_background"] =
      p.measured_snr_db_background ? json(*p.measured_snr_db_background) : json(nullptr);
  return j;
}

CorruptionProvenance provenance_from_json(const json& j) {
  CorruptionProvenance p;
  p.spec.seed = j.at("seed").get<std::uint64_t>();
  p.spec.ir_id = opt_get<std::string>(j, "ir_id");
  p.spec.interferer_id = opt_get<std::string>(j, "interferer_id");
  p.spec.noise_id = opt_get<std::string>(j, "noise_id");
  p.spec.snr_db_background = j.at("snr_db_background").get<double>();
  p.spec.snr_db_interferer = j.at("snr_db_interferer").get<double>();
  p.interferer_offset = j.at("interferer_offset").get<std::size_t>();
  p.noise_offset = j.at("noise_offset").get<std::size_t>();
  p.interferer_scale = j.at("interferer_scale").get<double>();
  p.noise_scale = j.at("noise_scale").get<double>();
  p.peak_rescale = j.at("peak_rescale").get<double>();
  p.measured_snr_db_background = opt_get<double>(j, "measured_snr_db_background");
  return p;
}

json record_to_json(const LipHypRecord& r) {
  json j;
  j["id"] = r.id;
  j["split"] = split_name(r.split);
  j["transcript"] = join_words(r.transcript);
  json hyps = json::array();
  for (const auto& h : r.hypotheses) {
    json hj;
    hj["text"] = join_words(h.words);
    hj["score"] = h.score;
    hj["rank"] = h.rank;
    hyps.push_back(std::move(hj));
  }
  j["hypotheses"] = std::move(hyps);
  j["complete"] = r.complete;
  j["audio_ref"] = r.audio_ref;
  j["roi_ref"] = r.roi_ref;
  j["roi_format"] = r.roi_format;
  j["corruption"] = provenance_to_json(r.corruption);
  return j;
}

LipHypRecord record_from_json(const json& j) {
  LipHypRecord r;
  r.id = j.at("id").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.transcript = split_words(j.at("transcript").get<std::string>());
  for (const auto& hj : j.at("hypotheses"))
    r.hypotheses.push_back({split_words(hj.at("text").get<std::string>()), hj.at("score").get<double>(),
                            hj.at("rank").get<int>()});
  r.complete = j.at("complete").get<bool>();
  r.audio_ref = j.at("audio_ref").get<std::string>();
  r.roi_ref = j.at("roi_ref").get<std::string>();
  r.roi_format = j.at("roi_format").get<std::string>();
  r.corruption = provenance_from_json(j.at("corruption"));
  if (r.hypotheses.size() < 2) throw DataError("record " + r.id + ": fewer than 2 hypotheses");
  if (r.transcript.empty()) throw DataError("record " + r.id + ": empty transcript");
  return r;
}

json lattice_to_json(const EmissionLattice& lat, bool include_vocab) {
  json j;
  if (include_vocab) j["vocab"] = lat.vocab;
  j["frames"] = lat.frames;
  j["width"] = lat.width();
  j["logp"] = lat.logp;
  return j;
}

EmissionLattice lattice_from_json(const json& j, const Words& vocab) {
  EmissionLattice lat;
  lat.vocab = j.contains("vocab") ? j.at("vocab").get<Words>() : vocab;
  lat.frames = j.at("frames").get<int>();
  lat.logp = j.at("logp").get<std::vector<double>>();
  if (j.at("width").get<int>() != lat.width())
    throw DataError("lattice width " + std::to_string(j.at("width").get<int>()) + " does not match vocabulary size " +
                    std::to_string(lat.vocab.size()) + " + blank");
  lat.validate();
  return lat;
}

void write_jsonl(const std::vector<json>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw DataError("write failed for " + path);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON line: " + e.what());
    }
  }
  return rows;
}

void write_manifest(const std::vector<LipHypRecord>& records, const std::string& path) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(record_to_json(r));
  write_jsonl(rows, path);
}

std::vector<LipHypRecord> read_manifest(const std::string& path) {
  const auto rows = read_jsonl(path);
  std::vector<LipHypRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(record_from_json(rows[i]));
    } catch (const json::exception& e) {
      throw DataError(path + ": record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lipger
