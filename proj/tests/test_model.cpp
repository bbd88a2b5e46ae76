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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lipger/model.hpp"
#include "lipger/selftest.hpp"

namespace lipger {
namespace {

Tensor random_feature(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor e({c.lip.steps, c.lip.feature_dim});
  for (auto& x : e.data) x = rng.normal();
  return e;
}

std::vector<int> random_ids(const ModelConfig& c, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (auto& i : ids) i = static_cast<int>(rng.index(static_cast<std::size_t>(c.vocab_size)));
  return ids;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

TEST(Adapter, ZeroGateReproducesBaseModelExactly) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  for (int n : {1, 5, c.max_len}) {
    const auto ids = random_ids(c, n, 10 + n);
    const Tensor base = base_forward(ids, p);
    const Tensor adapted = adapter_forward(ids, random_feature(c, 4), p);
    ASSERT_EQ(base.shape, adapted.shape);
    EXPECT_EQ(max_abs_diff(base, adapted), 0.0);
  }
}

TEST(Adapter, NonZeroGateChangesLogitsAndDependsOnLips) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  for (auto& a : p.adapters) a.gate.value.data[0] = 0.5;
  const auto ids = random_ids(c, 6, 1);
  const Tensor base = base_forward(ids, p);
  const Tensor a1 = adapter_forward(ids, random_feature(c, 4), p);
  const Tensor a2 = adapter_forward(ids, random_feature(c, 5), p);
  EXPECT_GT(max_abs_diff(base, a1), 1e-6);
  EXPECT_GT(max_abs_diff(a1, a2), 1e-6);
}

TEST(Adapter, TraceShapes) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  AdapterTrace tr;
  const auto ids = random_ids(c, 7, 2);
  const Tensor logits = adapter_forward(ids, random_feature(c, 4), p, &tr);
  const int V = c.lip.steps, K = c.prompt_len, C = c.dim;
  EXPECT_EQ(tr.fused_shape, (std::vector<int>{V + K, C}));
  EXPECT_EQ(tr.selected_shape, (std::vector<int>{K, C}));
  EXPECT_EQ(tr.attended_shape, (std::vector<int>{K + 7, C}));
  EXPECT_EQ(tr.layers_applied, c.layers);
  EXPECT_EQ(logits.shape, (std::vector<int>{7, c.vocab_size}));
}

TEST(Adapter, WrongLipFeatureShapeRejected) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  const auto ids = random_ids(c, 3, 2);
  EXPECT_THROW(adapter_forward(ids, Tensor({c.lip.steps + 1, c.lip.feature_dim}), p), PreconditionError);
  EXPECT_THROW(adapter_forward(ids, Tensor({c.lip.steps, c.lip.feature_dim + 1}), p), PreconditionError);
}

TEST(Decoder, IsCausal) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  for (auto& a : p.adapters) a.gate.value.data[0] = 0.7;
  const Tensor e = random_feature(c, 8);
  auto ids = random_ids(c, 8, 3);
  const Tensor before = adapter_forward(ids, e, p);
  ids[5] = (ids[5] + 1) % c.vocab_size;
  const Tensor after = adapter_forward(ids, e, p);
  for (int r = 0; r < 8; ++r)
    for (int v = 0; v < c.vocab_size; ++v) {
      if (r < 5)
        EXPECT_EQ(before.at(r, v), after.at(r, v));
    }
  EXPECT_GT(max_abs_diff(before, after), 0.0);
}

TEST(Decoder, RejectsOverlongAndOutOfRangeIds) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  EXPECT_THROW(base_forward(random_ids(c, c.max_len + 1, 1), p), PreconditionError);
  const std::vector<int> bad{0, c.vocab_size};
  EXPECT_THROW(base_forward(bad, p), PreconditionError);
  EXPECT_THROW(base_forward(std::vector<int>{}, p), PreconditionError);
}

TEST(Params, PartitionsAndNames) {
  auto p = ModelParams::init(miniature_config(), 1);
  std::set<std::string> names;
  bool saw_gate = false;
  p.visit([&](const std::string& n, Parameter& t, bool trainable) {
    EXPECT_TRUE(names.insert(n).second) << n;
    const bool adapter_side = n.rfind("lm.", 0) != 0;
    EXPECT_EQ(trainable, adapter_side) << n;
    if (n.find(".gate") != std::string::npos) {
      saw_gate = true;
      EXPECT_EQ(t.value.data, std::vector<double>{0.0});
    }
  });
  EXPECT_TRUE(saw_gate);
  EXPECT_TRUE(names.count("prompt_enc.vis_pos"));
  EXPECT_TRUE(names.count("lip.stem.w"));

  p.enable_adapter_training();
  p.visit([](const std::string& n, Parameter& t, bool trainable) { EXPECT_EQ(t.requires_grad, trainable) << n; });
  p.enable_base_training();
  p.visit([](const std::string& n, Parameter& t, bool trainable) { EXPECT_EQ(t.requires_grad, !trainable) << n; });
  p.disable_grads();
  p.visit([](const std::string&, Parameter& t, bool) { EXPECT_FALSE(t.requires_grad); });
}

TEST(Params, InitIsDeterministicPerPartition) {
  const ModelConfig c = miniature_config();
  auto a = ModelParams::init(c, 5);
  auto b = ModelParams::init(c, 5);
  auto d = ModelParams::init(c, 6);
  std::map<std::string, Tensor> va, vb, vd;
  a.visit([&](const std::string& n, Parameter& t, bool) { va[n] = t.value; });
  b.visit([&](const std::string& n, Parameter& t, bool) { vb[n] = t.value; });
  d.visit([&](const std::string& n, Parameter& t, bool) { vd[n] = t.value; });
  EXPECT_EQ(va, vb);
  EXPECT_NE(va.at("lm.tok_emb"), vd.at("lm.tok_emb"));
}

TEST(Config, Validation) {
  ModelConfig c = miniature_config();
  c.heads = 3;  // 16 % 3 != 0
  EXPECT_THROW(c.validate(), PreconditionError);
  c = miniature_config();
  c.prompt_len = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
  c = miniature_config();
  c.vocab_size = 0;
  EXPECT_THROW(ModelParams::init(c, 1), PreconditionError);
  EXPECT_TRUE(miniature_config() == miniature_config());
}

TEST(Loss, CeMatchesManualSoftmax) {
  Tensor logits({2, 3}, {0.0, 1.0, 2.0, 3.0, 0.0, 0.0});
  const std::vector<int> t{2, 1};
  const double lse0 = std::log(1 + std::exp(1.0) + std::exp(2.0));
  const double lse1 = std::log(std::exp(3.0) + 2.0);
  EXPECT_NEAR(ce_loss(logits, t, std::vector<char>{1, 1}), ((lse0 - 2.0) + lse1) / 2, 1e-12);
  EXPECT_NEAR(ce_loss(logits, t, std::vector<char>{0, 1}), lse1, 1e-12);
  EXPECT_THROW(ce_loss(logits, t, std::vector<char>{0, 0}), PreconditionError);
}

TEST(Generate, GreedyMatchesStepwiseArgmax) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 7);
  const std::vector<int> prompt{1, 5, 6};
  const auto out = generate(prompt, std::nullopt, p, 5, 2);
  std::vector<int> seq = prompt;
  std::vector<int> expected;
  for (int s = 0; s < 5; ++s) {
    const Tensor l = base_forward(seq, p);
    int best = 0;
    for (int v = 1; v < c.vocab_size; ++v)
      if (l.at(l.rows() - 1, v) > l.at(l.rows() - 1, best)) best = v;
    if (best == 2) break;
    expected.push_back(best);
    seq.push_back(best);
  }
  EXPECT_EQ(out, expected);
}

TEST(Generate, StopsAtMaxLength) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 7);
  const auto ids = random_ids(c, c.max_len - 2, 3);
  EXPECT_LE(generate(ids, random_feature(c, 1), p, 50, -1).size(), 2u);
}

TEST(SequenceLogProb, SumsConditionalLogProbs) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 7);
  const std::vector<int> ids{1, 4, 9, 2};
  const auto s = sequence_log_prob(ids, p);
  EXPECT_EQ(s.count, 3);
  const Tensor l = base_forward(ids, p);
  double want = 0;
  for (int r = 0; r < 3; ++r) {
    double z = 0;
    for (int v = 0; v < c.vocab_size; ++v) z += std::exp(l.at(r, v));
    want += l.at(r, ids[static_cast<std::size_t>(r) + 1]) - std::log(z);
  }
  EXPECT_NEAR(s.total, want, 1e-10);
  EXPECT_LT(s.total, 0.0);
}

}  // namespace
}  // namespace lipger
