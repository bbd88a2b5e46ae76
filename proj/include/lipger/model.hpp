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

#ifndef LIPGER_MODEL_HPP_
#define LIPGER_MODEL_HPP_

// Small pre-norm decoder-only language model with lip-conditioned adapters.
//
// For decoder layer l the adapter builds
//   I_l = Concat(Projection(E), P_v[l])            (V+K) x C
//   G_l = Encoder(I_l)[:K]                         K x C
//   A_l = G_l + P_a[l]
// and the layer's self-attention runs over [A_l ; T_l]: token positions
// attend causally to tokens and fully to the K prefix positions, with the
// prefix contribution scaled by gate[l]. Prefix outputs are discarded after
// the layer, so only the token-side attention onto the prefix is computed.
// The prompt encoder is shared by all layers.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipger/autograd.hpp"
#include "lipger/lip_encoder.hpp"

namespace lipger {

struct ModelConfig {
  int vocab_size = 0;
  int dim = 64;            // C
  int layers = 2;          // L
  int heads = 4;
  int ff_mult = 4;
  int max_len = 192;
  int prompt_len = 15;     // K
  int encoder_layers = 4;  // T
  LipEncoderConfig lip;    // lip.steps is V, lip.feature_dim is C_lip

  void validate() const;
  bool operator==(const ModelConfig& o) const;
};

struct TransformerBlock {
  Parameter ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct AdapterLayerState {
  Parameter p_v;   // K x C
  Parameter p_a;   // K x C
  Parameter gate;  // scalar, starts at 0
};

struct VisualPromptEncoder {
  Parameter vis_pos;  // V x C, added to the projected lip feature
  std::vector<TransformerBlock> blocks;
  Parameter ln_g, ln_b;
};

struct ModelParams {
  ModelConfig config;
  // Frozen during adapter fine-tuning.
  Parameter tok_emb, pos_emb;
  std::vector<TransformerBlock> layers;
  Parameter lnf_g, lnf_b, w_out;
  // Trainable during adapter fine-tuning.
  std::vector<AdapterLayerState> adapters;
  VisualPromptEncoder prompt_encoder;
  Parameter lip_proj;  // C_lip x C
  LipEncoderParams lip;

  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  // Visits every tensor with its checkpoint name and whether it belongs to
  // the adapter-trainable partition.
  void visit(const std::function<void(const std::string&, Parameter&, bool trainable)>& fn);
  void visit(const std::function<void(const std::string&, const Parameter&, bool trainable)>& fn) const;

  // Adapter fine-tuning: only the trainable partition requires grad.
  void enable_adapter_training();
  // Base LM pre-training: only the frozen partition requires grad.
  void enable_base_training();
  void disable_grads();
  void zero_grads();
};

// Shapes seen by one adapter_forward call (per layer, identical across layers).
struct AdapterTrace {
  std::vector<int> fused_shape;     // I_l
  std::vector<int> selected_shape;  // G_l
  std::vector<int> attended_shape;  // [A_l ; T_l]
  int layers_applied = 0;
};

// A_l for every layer, from a [V, C_lip] lip feature.
std::vector<Var> adapter_prefixes(Tape& tape, Var lip_feature, ModelParams& params, AdapterTrace* trace = nullptr);

// Token logits [I, vocab]. `prefixes` empty -> plain causal decoder.
Var decoder_forward(Tape& tape, std::span<const int> ids, ModelParams& params, const std::vector<Var>& prefixes,
                    AdapterTrace* trace = nullptr);

Var base_forward(Tape& tape, std::span<const int> ids, ModelParams& params);
Var adapter_forward(Tape& tape, std::span<const int> ids, Var lip_feature, ModelParams& params,
                    AdapterTrace* trace = nullptr);

Tensor base_forward(std::span<const int> ids, ModelParams& params);
Tensor adapter_forward(std::span<const int> ids, const Tensor& lip_feature, ModelParams& params,
                       AdapterTrace* trace = nullptr);

// Mean negative log-likelihood over rows with mask set.
double ce_loss(const Tensor& logits, std::span<const int> targets, std::span<const char> mask);

// Greedy continuation of `prompt_ids` until EOS or max_new tokens. Without a
// lip feature this is the text-only decoder path.
std::vector<int> generate(std::span<const int> prompt_ids, const std::optional<Tensor>& lip_feature,
                          ModelParams& params, int max_new, int eos_id);

// Sum of log-probabilities of `ids[1:]` given their prefixes, and the count.
struct SequenceLogProb {
  double total = 0.0;
  int count = 0;
};
SequenceLogProb sequence_log_prob(std::span<const int> ids, ModelParams& params);

}  // namespace lipger

#endif  // LIPGER_MODEL_HPP_
