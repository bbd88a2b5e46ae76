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

#include "lipger/eval.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "lipger/lip_encoder.hpp"

namespace lipger {

std::vector<std::string> parse_systems(std::string_view csv) {
  std::vector<bool> want(kAllSystems.size(), false);
  std::string item;
  std::stringstream ss{std::string(csv)};
  while (std::getline(ss, item, ',')) {
    if (item == "lm") item = "lm_rescore";
    bool found = false;
    for (std::size_t i = 0; i < kAllSystems.size(); ++i)
      if (kAllSystems[i] == item) want[i] = found = true;
    if (!found) throw PreconditionError("unknown system '" + item + "' (expected onebest, lm, ger, lipger)");
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kAllSystems.size(); ++i)
    if (want[i]) out.push_back(kAllSystems[i]);
  LIPGER_REQUIRE(!out.empty(), "no systems requested");
  return out;
}

std::size_t rescore_choose(std::span<const double> lm_mean, std::span<const double> asr_mean) {
  LIPGER_REQUIRE(!lm_mean.empty() && lm_mean.size() == asr_mean.size(), "rescore_choose: score lists differ");
  std::size_t best = 0;
  double best_v = 0.5 * (lm_mean[0] + asr_mean[0]);
  for (std::size_t i = 1; i < lm_mean.size(); ++i) {
    const double v = 0.5 * (lm_mean[i] + asr_mean[i]);
    if (v > best_v) {
      best = i;
      best_v = v;
    }
  }
  return best;
}

double asr_per_token(const TextHypothesis& h) {
  return h.score / static_cast<double>(std::max<std::size_t>(1, h.words.size()));
}

double lm_per_token(const Words& words, ModelParams& lm, const Tokenizer& tok) {
  std::vector<int> ids{Tokenizer::kBos};
  for (const auto& w : words) ids.push_back(tok.id(w));
  ids.push_back(Tokenizer::kEos);
  const auto lp = sequence_log_prob(ids, lm);
  return lp.total / lp.count;
}

const TextHypothesis& lm_rescore_choose(const LipHypRecord& record, ModelParams& lm, const Tokenizer& tok) {
  LIPGER_REQUIRE(!record.hypotheses.empty(), "lm_rescore_choose: record has no hypotheses");
  std::vector<double> lm_mean, asr_mean;
  for (const auto& h : record.hypotheses) {
    lm_mean.push_back(lm_per_token(h.words, lm, tok));
    asr_mean.push_back(asr_per_token(h));
  }
  return record.hypotheses[rescore_choose(lm_mean, asr_mean)];
}

Words correct(const LipHypRecord& record, const std::optional<Tensor>& lip_feature, ModelParams& model,
              const Tokenizer& tok, int max_new) {
  const InstructionSample s = render_instruction(record);
  std::vector<int> prompt{Tokenizer::kBos};
  for (int id : tok.tokenize(s.prompt)) prompt.push_back(id);
  const auto out = generate(prompt, lip_feature, model, max_new, Tokenizer::kEos);
  return split_words(normalize_text(tok.detokenize(out)));
}

namespace {

std::optional<Tensor> load_feature(const LipHypRecord& r, ModelParams& model, const std::string& root) {
  if (r.roi_ref.empty()) return std::nullopt;
  std::filesystem::path p(r.roi_ref);
  if (p.is_relative() && !root.empty()) p = std::filesystem::path(root) / p;
  try {
    const RoiSequence rois = read_roi(p.string(), r.roi_format);
    const PreparedRois prepared = preprocess_rois(rois, model.config.lip.roi_height, model.config.lip.roi_width);
    return encode_lips(prepared, model.lip);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

json counts_json(const WerCounts& c) {
  json j = json::object();
  j["wer"] = c.wer();
  j["substitutions"] = c.substitutions;
  j["deletions"] = c.deletions;
  j["insertions"] = c.insertions;
  j["ref_words"] = c.ref_words;
  return j;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

}  // namespace

EvalReport evaluate_systems(const std::vector<LipHypRecord>& manifest, ModelParams* model, const Tokenizer* tok,
                            const EvalOptions& options) {
  EvalReport rep;
  rep.systems = options.systems;
  for (const auto& s : rep.systems) {
    if (s != "onebest" && (model == nullptr || tok == nullptr))
      throw PreconditionError("system " + s + " needs a model checkpoint");
    rep.totals[s] = WerCounts{};
    rep.skipped[s] = 0;
  }
  for (const auto& r : manifest) {
    if (r.split != Split::kTest) continue;
    RecordEval re;
    re.id = r.id;
    re.reference = r.transcript;
    for (const auto& s : rep.systems) {
      Words out;
      if (s == "onebest") {
        out = r.hypotheses.at(0).words;
      } else if (s == "lm_rescore") {
        out = lm_rescore_choose(r, *model, *tok).words;
      } else if (s == "ger") {
        out = correct(r, std::nullopt, *model, *tok, options.max_new);
      } else {
        auto feature = load_feature(r, *model, options.data_root);
        if (!feature) {
          ++rep.skipped[s];
          continue;
        }
        out = correct(r, feature, *model, *tok, options.max_new);
      }
      rep.totals[s] += wer_counts(r.transcript, out);
      re.outputs[s] = std::move(out);
    }
    rep.records.push_back(std::move(re));
  }
  if (rep.records.empty()) throw DataError("evaluation manifest has no test-split records");
  return rep;
}

json EvalReport::to_json() const {
  json j = json::object();
  j["config"] = config;
  json sys = json::array();
  for (const auto& s : systems) {
    json e = json::object();
    e["system"] = s;
    e.update(counts_json(totals.at(s)));
    e["skipped"] = skipped.at(s);
    sys.push_back(e);
  }
  j["systems"] = sys;
  json recs = json::array();
  for (const auto& r : records) {
    json e = json::object();
    e["id"] = r.id;
    e["reference"] = join_words(r.reference);
    json outs = json::object();
    for (const auto& s : systems) {
      auto it = r.outputs.find(s);
      outs[s] = it == r.outputs.end() ? json(nullptr) : json(join_words(it->second));
    }
    e["outputs"] = outs;
    recs.push_back(e);
  }
  j["records"] = recs;
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "system" << std::right << std::setw(9) << "WER%" << std::setw(7) << "S"
     << std::setw(7) << "D" << std::setw(7) << "I" << std::setw(8) << "words" << std::setw(9) << "skipped" << '\n';
  for (const auto& s : systems) {
    const auto& c = totals.at(s);
    os << std::left << std::setw(12) << s << std::right << std::setw(9) << pct(c.wer()) << std::setw(7)
       << c.substitutions << std::setw(7) << c.deletions << std::setw(7) << c.insertions << std::setw(8)
       << c.ref_words << std::setw(9) << skipped.at(s) << '\n';
  }
  return os.str();
}

json summarize_report(const json& report) {
  double base = -1.0;
  for (const auto& s : report.at("systems"))
    if (s.at("system") == "onebest") base = s.at("wer").get<double>();
  json rows = json::array();
  for (const auto& s : report.at("systems")) {
    json e = json::object();
    e["system"] = s.at("system");
    e["wer"] = s.at("wer");
    const double w = s.at("wer").get<double>();
    e["relative_change_vs_onebest"] = base > 0.0 ? json((w - base) / base) : json(nullptr);
    rows.push_back(e);
  }
  json out = json::object();
  out["systems"] = rows;
  return out;
}

std::string summary_table(const json& summary) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "system" << std::right << std::setw(9) << "WER%" << std::setw(14)
     << "rel.change%" << '\n';
  for (const auto& s : summary.at("systems")) {
    os << std::left << std::setw(12) << s.at("system").get<std::string>() << std::right << std::setw(9)
       << pct(s.at("wer").get<double>()) << std::setw(14)
       << (s.at("relative_change_vs_onebest").is_null() ? std::string("n/a")
                                                        : pct(s.at("relative_change_vs_onebest").get<double>()))
       << '\n';
  }
  return os.str();
}

}  // namespace lipger
