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

#include "lipger/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>

#include "lipger/eval.hpp"

namespace lipger {

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw PreconditionError("config " + key + ": cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw PreconditionError("config " + key + ": expected true or false, got '" + v + "'");
}

struct Field {
  std::string key;
  std::function<void(PipelineConfig&, const std::string& key, const std::string&)> set;
  std::function<json(const PipelineConfig&)> get;
};

template <class T, class Access>
Field field(std::string key, Access access) {
  Field f;
  f.key = std::move(key);
  f.set = [access](PipelineConfig& c, const std::string& k, const std::string& v) {
    T& dst = access(c);
    if constexpr (std::is_same_v<T, bool>)
      dst = parse_bool(k, v);
    else if constexpr (std::is_same_v<T, std::string>)
      dst = v;
    else
      dst = parse_number<T>(k, v);
  };
  f.get = [access](const PipelineConfig& c) { return json(access(const_cast<PipelineConfig&>(c))); };
  return f;
}

#define LIPGER_FIELD(T, key, expr) field<T>(key, [](PipelineConfig& c) -> T& { return expr; })

void add_train_fields(std::vector<Field>& f, const std::string& s, TrainConfig PipelineConfig::*m) {
  auto tc = [m](PipelineConfig& c) -> TrainConfig& { return c.*m; };
  f.push_back(field<double>(s + ".learning_rate", [tc](PipelineConfig& c) -> double& { return tc(c).learning_rate; }));
  f.push_back(field<double>(s + ".weight_decay", [tc](PipelineConfig& c) -> double& { return tc(c).weight_decay; }));
  f.push_back(field<int>(s + ".batch_size", [tc](PipelineConfig& c) -> int& { return tc(c).batch_size; }));
  f.push_back(field<int>(s + ".epochs", [tc](PipelineConfig& c) -> int& { return tc(c).epochs; }));
  f.push_back(field<double>(s + ".clip_norm", [tc](PipelineConfig& c) -> double& { return tc(c).clip_norm; }));
  f.push_back(field<double>(s + ".momentum", [tc](PipelineConfig& c) -> double& { return tc(c).momentum; }));
  f.push_back(field<int>(s + ".max_steps", [tc](PipelineConfig& c) -> int& { return tc(c).max_steps; }));
  Field opt;
  opt.key = s + ".optimizer";
  opt.set = [tc](PipelineConfig& c, const std::string&, const std::string& v) { tc(c).optimizer = parse_optimizer(v); };
  opt.get = [tc](const PipelineConfig& c) {
    return json(std::string(optimizer_name(tc(const_cast<PipelineConfig&>(c)).optimizer)));
  };
  f.push_back(opt);
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f = {
        LIPGER_FIELD(std::uint64_t, "run.seed", c.seed),
        LIPGER_FIELD(std::string, "paths.workdir", c.workdir),
        LIPGER_FIELD(std::string, "paths.source", c.source),
        LIPGER_FIELD(std::string, "paths.pools", c.pools),
        LIPGER_FIELD(int, "toy.utterances", c.toy.utterances),
        LIPGER_FIELD(int, "toy.roi_size", c.toy.roi_size),
        LIPGER_FIELD(int, "toy.frames_per_word", c.toy.frames_per_word),
        LIPGER_FIELD(double, "toy.word_seconds", c.toy.word_seconds),
        LIPGER_FIELD(double, "toy.roi_noise", c.toy.roi_noise),
        LIPGER_FIELD(double, "simulate.snr_min", c.simulate.snr_background_min),
        LIPGER_FIELD(double, "simulate.snr_max", c.simulate.snr_background_max),
        LIPGER_FIELD(double, "simulate.interferer_snr_min", c.simulate.snr_interferer_min),
        LIPGER_FIELD(double, "simulate.interferer_snr_max", c.simulate.snr_interferer_max),
        LIPGER_FIELD(double, "simulate.p_reverb", c.simulate.p_reverb),
        LIPGER_FIELD(double, "simulate.p_interferer", c.simulate.p_interferer),
        LIPGER_FIELD(double, "simulate.p_noise", c.simulate.p_noise),
        LIPGER_FIELD(int, "decode.beam_width", c.decode.beam_width),
        LIPGER_FIELD(int, "decode.n_plus_1", c.decode.n_plus_1),
        LIPGER_FIELD(double, "decode.strength_at_0db", c.decode.strength_at_0db),
        LIPGER_FIELD(double, "decode.strength_at_40db", c.decode.strength_at_40db),
        LIPGER_FIELD(double, "decode.floor_mass", c.decode.floor_mass),
        LIPGER_FIELD(double, "build.train_ratio", c.train_ratio),
        LIPGER_FIELD(bool, "build.check_refs", c.check_refs),
        LIPGER_FIELD(int, "model.dim", c.model.dim),
        LIPGER_FIELD(int, "model.layers", c.model.layers),
        LIPGER_FIELD(int, "model.heads", c.model.heads),
        LIPGER_FIELD(int, "model.ff_mult", c.model.ff_mult),
        LIPGER_FIELD(int, "model.max_len", c.model.max_len),
        LIPGER_FIELD(int, "model.prompt_len", c.model.prompt_len),
        LIPGER_FIELD(int, "model.encoder_layers", c.model.encoder_layers),
        LIPGER_FIELD(int, "model.roi_size", c.model.lip.roi_height),
        LIPGER_FIELD(int, "model.lip_stem_channels", c.model.lip.stem_channels),
        LIPGER_FIELD(int, "model.lip_kernel_t", c.model.lip.stem_kernel_t),
        LIPGER_FIELD(int, "model.lip_kernel_hw", c.model.lip.stem_kernel_hw),
        LIPGER_FIELD(int, "model.lip_blocks", c.model.lip.blocks),
        LIPGER_FIELD(int, "model.lip_tcn_levels", c.model.lip.tcn_levels),
        LIPGER_FIELD(int, "model.lip_tcn_kernel", c.model.lip.tcn_kernel),
        LIPGER_FIELD(int, "model.lip_dim", c.model.lip.feature_dim),
        LIPGER_FIELD(int, "model.lip_steps", c.model.lip.steps),
        LIPGER_FIELD(double, "pretrain.text_weight", c.pretrain_text_weight),
        LIPGER_FIELD(double, "pretrain.record_share", c.pretrain_record_share),
        LIPGER_FIELD(int, "eval.max_new", c.max_new),
    };
    add_train_fields(f, "pretrain", &PipelineConfig::pretrain);
    add_train_fields(f, "train", &PipelineConfig::train);
    Field sys;
    sys.key = "eval.systems";
    sys.set = [](PipelineConfig& c, const std::string&, const std::string& v) { c.systems = parse_systems(v); };
    sys.get = [](const PipelineConfig& c) { return json(c.systems); };
    f.push_back(sys);
    return f;
  }();
  return table;
}

#undef LIPGER_FIELD

}  // namespace

PipelineConfig::PipelineConfig() {
  // The toy ROI is square; the lip encoder sees it at its native size.
  model.dim = 32;
  model.heads = 4;
  model.layers = 2;
  model.max_len = 128;
  model.lip.roi_height = model.lip.roi_width = 24;
  model.lip.stem_channels = 16;
  model.lip.feature_dim = 32;
  model.lip.steps = 16;
  pretrain.optimizer = OptimizerKind::kAdamW;
  pretrain.learning_rate = 3e-3;
  pretrain.weight_decay = 0.0;
  pretrain.batch_size = 16;
  pretrain.epochs = 6;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (f.key == key) {
      f.set(*this, key, value);
      model.lip.roi_width = model.lip.roi_height;
      return;
    }
  throw PreconditionError("unknown config key '" + key + "'");
}

std::vector<std::string> PipelineConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

void PipelineConfig::validate() const {
  LIPGER_REQUIRE(!workdir.empty(), "config paths.workdir must be set");
  LIPGER_REQUIRE(!source.empty(), "config paths.source must be set");
  LIPGER_REQUIRE(simulate.snr_background_min >= 0.0 && simulate.snr_background_max <= 40.0 &&
                     simulate.snr_background_min <= simulate.snr_background_max,
                 "config simulate.snr_min/snr_max must satisfy 0 <= min <= max <= 40");
  LIPGER_REQUIRE(simulate.snr_interferer_min <= simulate.snr_interferer_max,
                 "config simulate.interferer_snr_min must not exceed interferer_snr_max");
  for (double p : {simulate.p_reverb, simulate.p_interferer, simulate.p_noise})
    LIPGER_REQUIRE(p >= 0.0 && p <= 1.0, "config simulate.p_* must lie in [0, 1]");
  LIPGER_REQUIRE(decode.n_plus_1 >= 2, "config decode.n_plus_1 must be >= 2");
  LIPGER_REQUIRE(decode.beam_width >= decode.n_plus_1, "config decode.beam_width must be >= n_plus_1");
  for (double s : {decode.strength_at_0db, decode.strength_at_40db})
    LIPGER_REQUIRE(s >= 0.0 && s < 1.0, "config decode.strength_* must lie in [0, 1)");
  LIPGER_REQUIRE(train_ratio >= 0.0 && train_ratio <= 1.0, "config build.train_ratio must lie in [0, 1]");
  LIPGER_REQUIRE(pretrain_text_weight >= 0.0, "config pretrain.text_weight must be >= 0");
  LIPGER_REQUIRE(pretrain_record_share > 0.0 && pretrain_record_share < 1.0,
                 "config pretrain.record_share must lie in (0, 1)");
  LIPGER_REQUIRE(max_new >= 1, "config eval.max_new must be >= 1");
  LIPGER_REQUIRE(toy.utterances >= 1, "config toy.utterances must be >= 1");
  ModelConfig m = model;
  m.vocab_size = Tokenizer::kNumSpecial + 1;
  m.validate();
  pretrain.validate();
  train.validate();
}

json PipelineConfig::section_json(const std::string& section) const {
  json j = json::object();
  for (const auto& f : fields())
    if (f.key.compare(0, section.size() + 1, section + ".") == 0) j[f.key.substr(section.size() + 1)] = f.get(*this);
  return j;
}

json PipelineConfig::to_json() const {
  json j = json::object();
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    j[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(*this);
  }
  return j;
}

PipelineConfig load_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw PreconditionError("config " + path + ": key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.get_value<std::string>());
  }
  cfg.validate();
  return cfg;
}

void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw PreconditionError("override '" + o + "' is not section.key=value");
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
  cfg.validate();
}

}  // namespace lipger
