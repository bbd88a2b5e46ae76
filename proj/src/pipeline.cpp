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

#include "lipger/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "lipger/checkpoint.hpp"
#include "lipger/eval.hpp"

namespace lipger {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string>& upstream_of() {
  static const std::map<std::string, std::string> m = {
      {"simulate", ""},       {"decode", "simulate"}, {"build", "decode"}, {"pretrain-lm", "build"},
      {"train", "pretrain-lm"}, {"eval", "train"},     {"report", "eval"},
  };
  return m;
}

json stage_settings(const PipelineConfig& c, const std::string& stage) {
  json j = json::object();
  if (stage == "simulate") {
    j["run"] = c.section_json("run");
    json paths = c.section_json("paths");
    paths.erase("workdir");
    j["paths"] = paths;
    j["toy"] = c.section_json("toy");
    j["simulate"] = c.section_json("simulate");
  } else if (stage == "decode") {
    j["decode"] = c.section_json("decode");
  } else if (stage == "build") {
    j["build"] = c.section_json("build");
  } else if (stage == "pretrain-lm") {
    j["model"] = c.section_json("model");
    j["pretrain"] = c.section_json("pretrain");
  } else if (stage == "train") {
    j["train"] = c.section_json("train");
  } else if (stage == "eval") {
    j["eval"] = c.section_json("eval");
  }
  return j;
}

std::string chain_hash(const std::string& upstream, const std::string& stage, const json& settings) {
  return hex64(fnv1a(upstream + "|" + stage + "|" + settings.dump()));
}

json read_json_file(const std::string& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(p + ": " + e.what());
  }
}

void write_text(const std::string& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p);
  out << text;
  if (!out) throw DataError("write failed: " + p);
}

void write_json_file(const std::string& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string read_stamp_hash(const std::string& dir) {
  const fs::path p = fs::path(dir) / "stamp.json";
  if (!fs::exists(p)) return {};
  return read_json_file(p.string()).value("hash", std::string());
}

std::string rel_to(const fs::path& p, const fs::path& base) { return fs::relative(p, base).generic_string(); }

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> s = {"simulate", "decode", "build", "pretrain-lm", "train", "eval", "report"};
  return s;
}

Pipeline::Pipeline(PipelineConfig config, bool force, std::ostream* log)
    : cfg_(std::move(config)), force_(force), log_(log) {
  cfg_.validate();
}

std::string Pipeline::stage_dir(const std::string& stage) const { return (fs::path(cfg_.workdir) / stage).string(); }

std::string Pipeline::path(const std::string& rel) const {
  const fs::path p(rel);
  return p.is_absolute() ? rel : (fs::path(cfg_.workdir) / p).string();
}

void Pipeline::log(const std::string& msg) const {
  if (log_ != nullptr) *log_ << msg << std::endl;
}

std::string Pipeline::expected_hash(const std::string& stage) const {
  const auto it = upstream_of().find(stage);
  if (it == upstream_of().end()) throw PreconditionError("unknown stage '" + stage + "'");
  const std::string up = it->second.empty() ? std::string() : expected_hash(it->second);
  return chain_hash(up, stage, stage_settings(cfg_, stage));
}

StageOutcome Pipeline::run(const std::string& stage) {
  const auto it = upstream_of().find(stage);
  if (it == upstream_of().end()) throw PreconditionError("unknown stage '" + stage + "'");
  const std::string& up = it->second;
  upstream_hash_.clear();
  if (!up.empty()) {
    const std::string stored = read_stamp_hash(stage_dir(up));
    if (stored.empty())
      throw DataError("stage '" + stage + "' needs the output of stage '" + up + "' in " + stage_dir(up) +
                      "; run '" + up + "' first");
    const std::string want = expected_hash(up);
    if (stored != want && !force_)
      throw DataError("stage '" + up + "' output was produced under a different config (hash " + stored +
                      ", current config gives " + want + "); rerun '" + up + "' or pass --force");
    upstream_hash_ = stored;
  }
  current_hash_ = chain_hash(upstream_hash_, stage, stage_settings(cfg_, stage));
  StageOutcome out{stage, false, current_hash_};
  const std::string dir = stage_dir(stage);
  if (read_stamp_hash(dir) == current_hash_) {
    out.noop = true;
    log(stage + ": up to date (" + current_hash_ + "), nothing to do");
    return out;
  }
  fs::create_directories(dir);
  fs::remove(fs::path(dir) / "stamp.json");
  log(stage + ": running");
  if (stage == "simulate") simulate();
  else if (stage == "decode") decode();
  else if (stage == "build") build();
  else if (stage == "pretrain-lm") pretrain();
  else if (stage == "train") train();
  else if (stage == "eval") eval();
  else report();

  json stamp = json::object();
  stamp["stage"] = stage;
  stamp["hash"] = current_hash_;
  stamp["upstream_hash"] = upstream_hash_;
  stamp["settings"] = stage_settings(cfg_, stage);
  write_json_file((fs::path(dir) / "stamp.json").string(), stamp);
  log(stage + ": done (" + current_hash_ + ")");
  return out;
}

std::vector<StageOutcome> Pipeline::run_all() {
  std::vector<StageOutcome> out;
  for (const auto& s : pipeline_stages()) out.push_back(run(s));
  return out;
}

std::string Pipeline::source_dir() const {
  if (cfg_.source == "toy") return stage_dir("simulate") + "/source";
  return fs::absolute(cfg_.source).string();
}

void Pipeline::simulate() {
  const fs::path work(cfg_.workdir);
  const fs::path src(source_dir());
  if (cfg_.source == "toy") {
    ToyCorpusOptions opts = cfg_.toy;
    opts.seed = derive_seed(cfg_.seed, "toy");
    log("simulate: writing toy source (" + std::to_string(opts.utterances) + " utterances)");
    materialize_toy_source(src.string(), opts);
  }
  const fs::path source_list = src / "source.jsonl";
  if (!fs::exists(source_list)) throw DataError("source directory has no source.jsonl: " + src.string());
  const NoisePools pools = load_pools(cfg_.pools.empty() ? (src / "pools").string() : cfg_.pools);

  const fs::path out_dir = fs::path(stage_dir("simulate"));
  fs::create_directories(out_dir / "noisy");
  std::vector<json> rows;
  std::set<std::string> words;
  for (const auto& row : read_jsonl(source_list.string())) {
    const SourceItem item = source_item_from_json(row);
    for (const auto& w : item.transcript) words.insert(w);
    const fs::path clean = src / item.audio_ref;
    const AudioClip audio = read_wav(clean.string());
    const CorruptionSpec spec = sample_corruption_spec(derive_seed(cfg_.seed, "corrupt/" + item.id), pools, cfg_.simulate);
    const SimulationResult sim = simulate_noisy(audio, spec, pools);
    const fs::path noisy = out_dir / "noisy" / (item.id + ".wav");
    write_wav(noisy.string(), sim.noisy);

    const bool toy = cfg_.source == "toy";
    json j = json::object();
    j["id"] = item.id;
    j["transcript"] = join_words(item.transcript);
    j["clean"] = toy ? rel_to(clean, work) : clean.string();
    j["noisy"] = rel_to(noisy, work);
    j["roi"] = item.roi_ref.empty() ? std::string() : (toy ? rel_to(src / item.roi_ref, work) : (src / item.roi_ref).string());
    j["roi_format"] = item.roi_format;
    j["corruption"] = provenance_to_json(sim.provenance);
    rows.push_back(std::move(j));
  }
  if (rows.empty()) throw DataError("source.jsonl lists no utterances");
  write_jsonl(rows, (out_dir / "manifest.jsonl").string());

  ConfusionSets sets;
  Words vocab;
  if (fs::exists(src / "confusions.json")) {
    vocab = read_confusions((src / "confusions.json").string(), sets);
  } else {
    vocab.assign(words.begin(), words.end());
    sets.assign(vocab.size(), {});
  }
  write_confusions((out_dir / "confusions.json").string(), vocab, sets);
  log("simulate: " + std::to_string(rows.size()) + " utterances");
}

void Pipeline::decode() {
  const fs::path sim(stage_dir("simulate"));
  ConfusionSets sets;
  const Words vocab = read_confusions((sim / "confusions.json").string(), sets);
  const DecodeSettings& d = cfg_.decode;
  std::vector<json> rows;
  for (const auto& row : read_jsonl((sim / "manifest.jsonl").string())) {
    const std::string id = row.at("id").get<std::string>();
    const Words transcript = split_words(row.at("transcript").get<std::string>());
    const CorruptionProvenance prov = provenance_from_json(row.at("corruption"));
    SynthLatticeOptions o;
    o.confusion_strength = confusion_strength_for_snr(effective_snr_db(prov), d.strength_at_0db, d.strength_at_40db);
    o.frames_per_token = 1;
    o.seed = derive_seed(cfg_.seed, "lattice/" + id);
    o.floor_mass = d.floor_mass;
    const EmissionLattice lat = synth_lattice(vocab, sets, words_to_tokens(transcript, vocab), o);
    const HypothesisList list = ctc_prefix_beam_nbest(lat, d.beam_width, d.n_plus_1);
    json j = json::object();
    j["id"] = id;
    j["confusion_strength"] = o.confusion_strength;
    j["complete"] = list.complete;
    json hyps = json::array();
    for (const auto& h : to_text_hypotheses(list, vocab)) {
      json hj = json::object();
      hj["text"] = join_words(h.words);
      hj["score"] = h.score;
      hj["rank"] = h.rank;
      hyps.push_back(hj);
    }
    j["hypotheses"] = hyps;
    j["lattice"] = lattice_to_json(lat, false);
    rows.push_back(std::move(j));
  }
  write_jsonl(rows, stage_dir("decode") + "/nbest.jsonl");
  std::ofstream v(stage_dir("decode") + "/vocab.txt", std::ios::trunc);
  for (const auto& w : vocab) v << w << '\n';
  log("decode: " + std::to_string(rows.size()) + " hypothesis lists");
}

void Pipeline::build() {
  std::map<std::string, json> nbest;
  for (auto& row : read_jsonl(stage_dir("decode") + "/nbest.jsonl")) nbest[row.at("id").get<std::string>()] = row;
  CorpusBuilder builder(false);
  std::size_t train_n = 0;
  for (const auto& row : read_jsonl(stage_dir("simulate") + "/manifest.jsonl")) {
    const std::string id = row.at("id").get<std::string>();
    const auto it = nbest.find(id);
    if (it == nbest.end()) throw DataError("decode output has no hypotheses for utterance " + id);
    std::vector<TextHypothesis> hyps;
    for (const auto& h : it->second.at("hypotheses"))
      hyps.push_back({split_words(h.at("text").get<std::string>()), h.at("score").get<double>(), h.at("rank").get<int>()});
    const std::string audio = row.at("noisy").get<std::string>();
    const std::string roi = row.at("roi").get<std::string>();
    if (cfg_.check_refs) {
      if (!fs::exists(path(audio))) throw DataError("utterance " + id + ": audio does not resolve: " + audio);
      if (!roi.empty() && !fs::exists(path(roi))) throw DataError("utterance " + id + ": ROI does not resolve: " + roi);
    }
    LipHypRecord r = build_record(split_words(row.at("transcript").get<std::string>()), hyps, audio, roi,
                                  provenance_from_json(row.at("corruption")), Split::kTrain);
    r.split = assign_split(r.id, cfg_.train_ratio);
    r.complete = it->second.at("complete").get<bool>();
    r.roi_format = row.at("roi_format").get<std::string>();
    train_n += r.split == Split::kTrain;
    builder.add(std::move(r));
  }
  write_manifest(builder.records(), stage_dir("build") + "/corpus.jsonl");
  std::vector<json> rows;
  for (const auto& r : builder.records()) {
    const InstructionSample s = render_instruction(r);
    json j = json::object();
    j["id"] = r.id;
    j["split"] = split_name(r.split);
    j["prompt"] = s.prompt;
    j["response"] = s.response;
    rows.push_back(std::move(j));
  }
  write_jsonl(rows, stage_dir("build") + "/instructions.jsonl");
  log("build: " + std::to_string(builder.records().size()) + " records, " + std::to_string(train_n) + " train");
}

namespace {

std::vector<LipHypRecord> split_records(const std::vector<LipHypRecord>& all, Split s) {
  std::vector<LipHypRecord> out;
  for (const auto& r : all)
    if (r.split == s) out.push_back(r);
  return out;
}

// The base LM and the adapters see disjoint train-split records, so the
// adapters are not fitted on responses the LM has already memorised.
bool for_base_lm(const LipHypRecord& r, double share) {
  return static_cast<double>(fnv1a(r.id + "#lm") % 10000ULL) < share * 10000.0;
}

std::function<void(const TrainStepLog&)> progress(std::ostream* log, const std::string& what) {
  if (log == nullptr) return {};
  return [log, what](const TrainStepLog& s) {
    if (s.step % 25 == 0) *log << what << ": step " << s.step << " loss " << s.loss << std::endl;
  };
}

}  // namespace

void Pipeline::pretrain() {
  const auto records = read_manifest(stage_dir("build") + "/corpus.jsonl");
  std::vector<LipHypRecord> train_recs;
  for (const auto& r : split_records(records, Split::kTrain))
    if (for_base_lm(r, cfg_.pretrain_record_share)) train_recs.push_back(r);
  if (train_recs.empty()) throw DataError("corpus has no train-split records for the base LM");
  std::vector<std::string> texts;
  std::ifstream vin(stage_dir("decode") + "/vocab.txt");
  for (std::string w; std::getline(vin, w);) texts.push_back(w);
  std::vector<InstructionSample> samples;
  for (const auto& r : train_recs) {
    samples.push_back(render_instruction(r));
    texts.push_back(samples.back().prompt);
    texts.push_back(samples.back().response);
  }
  const Tokenizer tok = Tokenizer::build(texts);

  std::vector<TrainExample> examples;
  for (const auto& s : samples) examples.push_back(make_example(tok, s));
  const auto plain = static_cast<std::size_t>(cfg_.pretrain_text_weight * static_cast<double>(train_recs.size()));
  for (std::size_t i = 0; i < plain; ++i)
    examples.push_back(make_text_example(tok, join_words(train_recs[i % train_recs.size()].transcript)));

  ModelConfig mc = cfg_.model;
  mc.vocab_size = tok.size();
  for (const auto& e : examples)
    if (static_cast<int>(e.input.size()) > mc.max_len)
      throw DataError("a training sequence has " + std::to_string(e.input.size()) + " tokens but model.max_len is " +
                      std::to_string(mc.max_len));
  ModelParams params = ModelParams::init(mc, derive_seed(cfg_.seed, "model"));
  TrainConfig tc = cfg_.pretrain;
  tc.seed = derive_seed(cfg_.seed, "pretrain");
  const TrainLog tl = lipger::train(examples, params, tc, TrainMode::kBase, nullptr, progress(log_, "pretrain-lm"));
  tl.write_csv(stage_dir("pretrain-lm") + "/log.csv");
  json extra = json::object();
  extra["stage"] = "pretrain-lm";
  extra["config_hash"] = current_hash_;
  save_checkpoint(params, tok, stage_dir("pretrain-lm") + "/base.ckpt", extra);
}

void Pipeline::train() {
  const std::string base = stage_dir("pretrain-lm") + "/base.ckpt";
  LoadedCheckpoint ck = load_checkpoint(base);
  const Tokenizer tok = load_checkpoint_vocab(base);
  ModelParams& params = ck.params;
  const auto records = read_manifest(stage_dir("build") + "/corpus.jsonl");
  auto to_examples = [&](const std::vector<LipHypRecord>& recs, std::size_t limit) {
    std::vector<TrainExample> out;
    for (const auto& r : recs) {
      if (out.size() >= limit) break;
      if (r.roi_ref.empty()) throw DataError("record " + r.id + " has no ROI reference; adapter training needs one");
      const RoiSequence rois = read_roi(path(r.roi_ref), r.roi_format);
      out.push_back(make_example(tok, render_instruction(r),
                                 preprocess_rois(rois, params.config.lip.roi_height, params.config.lip.roi_width)));
    }
    return out;
  };
  std::vector<LipHypRecord> adapter_recs;
  for (const auto& r : split_records(records, Split::kTrain))
    if (!for_base_lm(r, cfg_.pretrain_record_share)) adapter_recs.push_back(r);
  if (adapter_recs.empty()) throw DataError("corpus has no train-split records left for adapter training");
  const auto examples = to_examples(adapter_recs, records.size());
  const auto held_out = to_examples(split_records(records, Split::kTest), 32);
  TrainConfig tc = cfg_.train;
  tc.seed = derive_seed(cfg_.seed, "train");
  json extra = json::object();
  extra["stage"] = "train";
  extra["config_hash"] = current_hash_;
  TrainLog tl;
  try {
    tl = lipger::train(examples, params, tc, TrainMode::kAdapter, &held_out, progress(log_, "train"));
  } catch (const NumericError&) {
    save_checkpoint(params, tok, stage_dir("train") + "/last_good.ckpt", extra);
    throw;
  }
  tl.write_csv(stage_dir("train") + "/log.csv");
  std::ostringstream ev;
  ev << "epoch,eval_loss\n";
  for (std::size_t i = 0; i < tl.epoch_eval_loss.size(); ++i) ev << i + 1 << ',' << tl.epoch_eval_loss[i] << '\n';
  write_text(stage_dir("train") + "/eval_loss.csv", ev.str());
  save_checkpoint(params, tok, stage_dir("train") + "/model.ckpt", extra);
}

void Pipeline::eval() {
  const std::string ckpt = stage_dir("train") + "/model.ckpt";
  LoadedCheckpoint ck = load_checkpoint(ckpt);
  const Tokenizer tok = load_checkpoint_vocab(ckpt);
  const auto records = read_manifest(stage_dir("build") + "/corpus.jsonl");
  EvalOptions opts;
  opts.systems = cfg_.systems;
  opts.max_new = cfg_.max_new;
  opts.data_root = cfg_.workdir;
  EvalReport rep = evaluate_systems(records, &ck.params, &tok, opts);
  json echo = cfg_.to_json();
  echo["paths"].erase("workdir");
  rep.config = json::object();
  rep.config["config_hash"] = current_hash_;
  rep.config["resolved"] = echo;
  write_json_file(stage_dir("eval") + "/report.json", rep.to_json());
  write_text(stage_dir("eval") + "/report.txt", rep.to_table());
  log(rep.to_table());
}

void Pipeline::report() {
  const json rep = read_json_file(stage_dir("eval") + "/report.json");
  json summary = summarize_report(rep);
  summary["config_hash"] = current_hash_;
  write_json_file(stage_dir("report") + "/summary.json", summary);
  write_text(stage_dir("report") + "/summary.txt", summary_table(summary));
  log(summary_table(summary));
}

}  // namespace lipger
