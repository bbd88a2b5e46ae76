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

#include "lipger/model.hpp"

#include <algorithm>
#include <cmath>

#include "lipger/common.hpp"

namespace lipger {

namespace {

Parameter uniform(std::vector<int> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data) x = rng.uniform(-bound, bound);
  return Parameter(std::move(t));
}

Parameter fan_in(int rows, int cols, Rng& rng) { return uniform({rows, cols}, 1.0 / std::sqrt(rows), rng); }
Parameter filled(std::vector<int> shape, double v) { return Parameter(Tensor(std::move(shape), v)); }

TransformerBlock init_block(int c, int ff, Rng& rng) {
  TransformerBlock b;
  b.ln1_g = filled({c}, 1.0);
  b.ln1_b = filled({c}, 0.0);
  b.wq = fan_in(c, c, rng);
  b.wk = fan_in(c, c, rng);
  b.wv = fan_in(c, c, rng);
  b.wo = fan_in(c, c, rng);
  b.ln2_g = filled({c}, 1.0);
  b.ln2_b = filled({c}, 0.0);
  b.w1 = fan_in(c, ff, rng);
  b.b1 = filled({ff}, 0.0);
  b.w2 = fan_in(ff, c, rng);
  b.b2 = filled({c}, 0.0);
  return b;
}

template <class Fn, class Block>
void visit_block(const std::string& pre, Block& b, bool trainable, Fn&& fn) {
  fn(pre + "ln1.g", b.ln1_g, trainable);
  fn(pre + "ln1.b", b.ln1_b, trainable);
  fn(pre + "wq", b.wq, trainable);
  fn(pre + "wk", b.wk, trainable);
  fn(pre + "wv", b.wv, trainable);
  fn(pre + "wo", b.wo, trainable);
  fn(pre + "ln2.g", b.ln2_g, trainable);
  fn(pre + "ln2.b", b.ln2_b, trainable);
  fn(pre + "w1", b.w1, trainable);
  fn(pre + "b1", b.b1, trainable);
  fn(pre + "w2", b.w2, trainable);
  fn(pre + "b2", b.b2, trainable);
}

template <class Self, class Fn>
void visit_all(Self& p, Fn&& fn) {
  fn("lm.tok_emb", p.tok_emb, false);
  fn("lm.pos_emb", p.pos_emb, false);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    visit_block("lm.layer" + std::to_string(l) + ".", p.layers[l], false, fn);
  fn("lm.lnf.g", p.lnf_g, false);
  fn("lm.lnf.b", p.lnf_b, false);
  fn("lm.w_out", p.w_out, false);
  for (std::size_t l = 0; l < p.adapters.size(); ++l) {
    const std::string pre = "adapter.layer" + std::to_string(l) + ".";
    fn(pre + "p_v", p.adapters[l].p_v, true);
    fn(pre + "p_a", p.adapters[l].p_a, true);
    fn(pre + "gate", p.adapters[l].gate, true);
  }
  fn("prompt_enc.vis_pos", p.prompt_encoder.vis_pos, true);
  for (std::size_t t = 0; t < p.prompt_encoder.blocks.size(); ++t)
    visit_block("prompt_enc.layer" + std::to_string(t) + ".", p.prompt_encoder.blocks[t], true, fn);
  fn("prompt_enc.ln.g", p.prompt_encoder.ln_g, true);
  fn("prompt_enc.ln.b", p.prompt_encoder.ln_b, true);
  fn("lip_proj", p.lip_proj, true);
}

// Pre-norm block. `prefix` (may be null) adds gated attention onto A_l.
Var block_forward(Tape& tape, Var h, TransformerBlock& b, int heads, bool causal, const Var* prefix, Parameter* gate) {
  Var x = layer_norm(h, tape.param(b.ln1_g), tape.param(b.ln1_b));
  Var wq = tape.param(b.wq), wk = tape.param(b.wk), wv = tape.param(b.wv);
  Var a = attention(matmul(x, wq), matmul(x, wk), matmul(x, wv), heads, causal);
  if (prefix != nullptr) {
    Var q = matmul(x, wq);
    Var ap = attention(q, matmul(*prefix, wk), matmul(*prefix, wv), heads, false);
    a = add(a, scale_by(ap, tape.param(*gate)));
  }
  h = add(h, matmul(a, tape.param(b.wo)));
  Var x2 = layer_norm(h, tape.param(b.ln2_g), tape.param(b.ln2_b));
  Var f = gelu(add_row(matmul(x2, tape.param(b.w1)), tape.param(b.b1)));
  return add(h, add_row(matmul(f, tape.param(b.w2)), tape.param(b.b2)));
}

}  // namespace

void ModelConfig::validate() const {
  LIPGER_REQUIRE(vocab_size >= 1, "ModelConfig: vocab_size too small");
  LIPGER_REQUIRE(dim > 0 && heads > 0 && dim % heads == 0, "ModelConfig: dim must be divisible by heads");
  LIPGER_REQUIRE(layers >= 1 && ff_mult >= 1 && max_len >= 2, "ModelConfig: layers, ff_mult, max_len too small");
  LIPGER_REQUIRE(prompt_len >= 1, "ModelConfig: prompt_len (K) must be >= 1");
  LIPGER_REQUIRE(encoder_layers >= 1, "ModelConfig: encoder_layers (T) must be >= 1");
  lip.validate();
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  const auto& a = lip;
  const auto& b = o.lip;
  return vocab_size == o.vocab_size && dim == o.dim && layers == o.layers && heads == o.heads &&
         ff_mult == o.ff_mult && max_len == o.max_len && prompt_len == o.prompt_len &&
         encoder_layers == o.encoder_layers && a.roi_height == b.roi_height && a.roi_width == b.roi_width &&
         a.stem_channels == b.stem_channels && a.stem_kernel_t == b.stem_kernel_t &&
         a.stem_kernel_hw == b.stem_kernel_hw && a.blocks == b.blocks && a.tcn_levels == b.tcn_levels &&
         a.tcn_kernel == b.tcn_kernel && a.feature_dim == b.feature_dim && a.steps == b.steps;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const int c = cfg.dim;
  const int ff = cfg.dim * cfg.ff_mult;
  const int k = cfg.prompt_len;
  {
    Rng rng(derive_seed(seed, "base_lm"));
    p.tok_emb = uniform({cfg.vocab_size, c}, 0.5, rng);
    p.pos_emb = uniform({cfg.max_len, c}, 0.5, rng);
    for (int l = 0; l < cfg.layers; ++l) p.layers.push_back(init_block(c, ff, rng));
    p.lnf_g = filled({c}, 1.0);
    p.lnf_b = filled({c}, 0.0);
    p.w_out = fan_in(c, cfg.vocab_size, rng);
  }
  {
    Rng rng(derive_seed(seed, "adapters"));
    const double bound = 1.0 / std::sqrt(static_cast<double>(c));
    for (int l = 0; l < cfg.layers; ++l) {
      AdapterLayerState a;
      a.p_v = uniform({k, c}, bound, rng);
      a.p_a = uniform({k, c}, bound, rng);
      a.gate = filled({1}, 0.0);
      p.adapters.push_back(std::move(a));
    }
    p.prompt_encoder.vis_pos = uniform({cfg.lip.steps, c}, bound, rng);
    for (int t = 0; t < cfg.encoder_layers; ++t) p.prompt_encoder.blocks.push_back(init_block(c, ff, rng));
    p.prompt_encoder.ln_g = filled({c}, 1.0);
    p.prompt_encoder.ln_b = filled({c}, 0.0);
    p.lip_proj = fan_in(cfg.lip.feature_dim, c, rng);
  }
  p.lip = LipEncoderParams::init(cfg.lip, derive_seed(seed, "lip"));
  return p;
}

void ModelParams::visit(const std::function<void(const std::string&, Parameter&, bool)>& fn) {
  visit_all(*this, fn);
  lip.visit([&](const std::string& name, Parameter& p) { fn(name, p, true); });
}

void ModelParams::visit(const std::function<void(const std::string&, const Parameter&, bool)>& fn) const {
  auto& self = const_cast<ModelParams&>(*this);
  self.visit([&](const std::string& name, Parameter& p, bool t) { fn(name, p, t); });
}

void ModelParams::enable_adapter_training() {
  visit([](const std::string&, Parameter& p, bool trainable) { p.requires_grad = trainable; });
}

void ModelParams::enable_base_training() {
  visit([](const std::string&, Parameter& p, bool trainable) { p.requires_grad = !trainable; });
}

void ModelParams::disable_grads() {
  visit([](const std::string&, Parameter& p, bool) { p.requires_grad = false; });
}

void ModelParams::zero_grads() {
  visit([](const std::string&, Parameter& p, bool) { p.zero_grad(); });
}

std::vector<Var> adapter_prefixes(Tape& tape, Var lip_feature, ModelParams& p, AdapterTrace* trace) {
  const ModelConfig& cfg = p.config;
  const auto& shape = lip_feature.value().shape;
  if (shape.size() != 2 || shape[0] != cfg.lip.steps || shape[1] != cfg.lip.feature_dim)
    throw PreconditionError("adapter_forward: lip feature is " + lip_feature.value().shape_str() + ", expected [" +
                            std::to_string(cfg.lip.steps) + "," + std::to_string(cfg.lip.feature_dim) + "]");
  const int k = cfg.prompt_len;
  Var vis = add(matmul(lip_feature, tape.param(p.lip_proj)), tape.param(p.prompt_encoder.vis_pos));
  std::vector<Var> prefixes;
  for (auto& ad : p.adapters) {
    Var fused = concat_rows(vis, tape.param(ad.p_v));
    Var z = fused;
    for (auto& blk : p.prompt_encoder.blocks) z = block_forward(tape, z, blk, cfg.heads, false, nullptr, nullptr);
    z = layer_norm(z, tape.param(p.prompt_encoder.ln_g), tape.param(p.prompt_encoder.ln_b));
    Var selected = slice_rows(z, 0, k);
    prefixes.push_back(add(selected, tape.param(ad.p_a)));
    if (trace != nullptr) {
      trace->fused_shape = fused.value().shape;
      trace->selected_shape = selected.value().shape;
    }
  }
  return prefixes;
}

Var decoder_forward(Tape& tape, std::span<const int> ids, ModelParams& p, const std::vector<Var>& prefixes,
                    AdapterTrace* trace) {
  const ModelConfig& cfg = p.config;
  LIPGER_REQUIRE(!ids.empty(), "decoder_forward: empty token sequence");
  if (static_cast<int>(ids.size()) > cfg.max_len)
    throw PreconditionError("decoder_forward: sequence of " + std::to_string(ids.size()) +
                            " tokens exceeds max_len " + std::to_string(cfg.max_len));
  LIPGER_REQUIRE(prefixes.empty() || prefixes.size() == p.layers.size(),
                 "decoder_forward: need one prefix per layer");
  const int n = static_cast<int>(ids.size());
  std::vector<int> positions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) positions[static_cast<std::size_t>(i)] = i;
  Var h = add(embedding(tape.param(p.tok_emb), ids), embedding(tape.param(p.pos_emb), positions));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Var* prefix = prefixes.empty() ? nullptr : &prefixes[l];
    h = block_forward(tape, h, p.layers[l], cfg.heads, true, prefix, prefix ? &p.adapters[l].gate : nullptr);
    if (trace != nullptr && prefix != nullptr) {
      trace->attended_shape = {prefix->value().rows() + n, cfg.dim};
      ++trace->layers_applied;
    }
  }
  Var x = layer_norm(h, tape.param(p.lnf_g), tape.param(p.lnf_b));
  return matmul(x, tape.param(p.w_out));
}

Var base_forward(Tape& tape, std::span<const int> ids, ModelParams& params) {
  return decoder_forward(tape, ids, params, {});
}

Var adapter_forward(Tape& tape, std::span<const int> ids, Var lip_feature, ModelParams& params, AdapterTrace* trace) {
  const auto prefixes = adapter_prefixes(tape, lip_feature, params, trace);
  return decoder_forward(tape, ids, params, prefixes, trace);
}

Tensor base_forward(std::span<const int> ids, ModelParams& params) {
  Tape tape;
  return base_forward(tape, ids, params).value();
}

Tensor adapter_forward(std::span<const int> ids, const Tensor& lip_feature, ModelParams& params, AdapterTrace* trace) {
  Tape tape;
  return adapter_forward(tape, ids, tape.constant(lip_feature), params, trace).value();
}

double ce_loss(const Tensor& logits, std::span<const int> targets, std::span<const char> mask) {
  LIPGER_REQUIRE(logits.rank() == 2, "ce_loss: logits must be [I, vocab]");
  const auto count = std::count_if(mask.begin(), mask.end(), [](char m) { return m != 0; });
  if (count == 0) throw PreconditionError("ce_loss: empty loss mask");
  Tape tape;
  Var l = cross_entropy(tape.constant(logits), targets, mask, 1.0 / static_cast<double>(count));
  return l.value().data[0];
}

std::vector<int> generate(std::span<const int> prompt_ids, const std::optional<Tensor>& lip_feature,
                          ModelParams& params, int max_new, int eos_id) {
  LIPGER_REQUIRE(!prompt_ids.empty(), "generate: empty prompt");
  LIPGER_REQUIRE(max_new >= 1, "generate: max_len must be >= 1");
  // A_l depends only on the lip feature; compute once and reuse as constants.
  std::vector<Tensor> prefix_values;
  if (lip_feature) {
    Tape tape;
    for (const Var& v : adapter_prefixes(tape, tape.constant(*lip_feature), params)) prefix_values.push_back(v.value());
  }
  std::vector<int> ids(prompt_ids.begin(), prompt_ids.end());
  std::vector<int> out;
  for (int step = 0; step < max_new && static_cast<int>(ids.size()) < params.config.max_len; ++step) {
    Tape tape;
    std::vector<Var> prefixes;
    for (const auto& t : prefix_values) prefixes.push_back(tape.constant(t));
    const Tensor& logits = decoder_forward(tape, ids, params, prefixes).value();
    const int last = logits.rows() - 1;
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits.at(last, j) > logits.at(last, best)) best = j;
    if (best == eos_id) break;
    out.push_back(best);
    ids.push_back(best);
  }
  return out;
}

SequenceLogProb sequence_log_prob(std::span<const int> ids, ModelParams& params) {
  LIPGER_REQUIRE(ids.size() >= 2, "sequence_log_prob: need at least two tokens");
  const Tensor logits = base_forward(ids.first(ids.size() - 1), params);
  SequenceLogProb r;
  for (int i = 0; i < logits.rows(); ++i) {
    double mx = -INFINITY;
    for (int j = 0; j < logits.cols(); ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int j = 0; j < logits.cols(); ++j) z += std::exp(logits.at(i, j) - mx);
    r.total += logits.at(i, ids[static_cast<std::size_t>(i) + 1]) - mx - std::log(z);
    ++r.count;
  }
  return r;
}

}  // namespace lipger
