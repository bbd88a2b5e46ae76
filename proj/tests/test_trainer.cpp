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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "lipger/checkpoint.hpp"
#include "lipger/selftest.hpp"
#include "lipger/trainer.hpp"

namespace lipger {
namespace {

namespace fs = std::filesystem;

// Eight content words on top of the specials: vocab size 12.
Tokenizer mini_tokenizer() { return Tokenizer::build({"a b c d e f g h"}); }

PreparedRois mini_rois(const ModelConfig& c, int frames, std::uint64_t seed) {
  RoiSequence r;
  r.frames = frames;
  r.height = r.width = c.lip.roi_height;
  Rng rng(seed);
  r.pixels.resize(static_cast<std::size_t>(frames) * r.height * r.width);
  for (auto& p : r.pixels) p = rng.uniform();
  return preprocess_rois(r, c.lip.roi_height, c.lip.roi_width);
}

std::vector<TrainExample> mini_examples(const ModelConfig& c, int n) {
  const Tokenizer tok = mini_tokenizer();
  const Words w = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::vector<TrainExample> out;
  for (int i = 0; i < n; ++i) {
    InstructionSample s;
    s.prompt = w[static_cast<std::size_t>(i % 8)] + " " + w[static_cast<std::size_t>((i + 3) % 8)];
    s.response = w[static_cast<std::size_t>((i * 5) % 8)];
    out.push_back(make_example(tok, s, mini_rois(c, 2 + i % 3, static_cast<std::uint64_t>(i))));
  }
  return out;
}

std::map<std::string, Tensor> snapshot(ModelParams& p, bool trainable_side) {
  std::map<std::string, Tensor> out;
  p.visit([&](const std::string& n, Parameter& t, bool trainable) {
    if (trainable == trainable_side) out[n] = t.value;
  });
  return out;
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lipger_trainer_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Examples, MaskCoversResponseAndEos) {
  const Tokenizer tok = mini_tokenizer();
  const auto ex = make_example(tok, {"a b c", "d e", "id"});
  // ids: BOS a b c d e EOS
  EXPECT_EQ(ex.input, (std::vector<int>{1, tok.id("a"), tok.id("b"), tok.id("c"), tok.id("d"), tok.id("e")}));
  EXPECT_EQ(ex.target, (std::vector<int>{tok.id("a"), tok.id("b"), tok.id("c"), tok.id("d"), tok.id("e"), 2}));
  EXPECT_EQ(ex.mask, (std::vector<char>{0, 0, 0, 1, 1, 1}));
  const auto t = make_text_example(tok, "a b");
  EXPECT_EQ(t.mask, (std::vector<char>{1, 1, 1}));
}

TEST(Train, AdapterTrainingLeavesBaseBitIdentical) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 1);
  const auto frozen = snapshot(p, false);
  const auto before = snapshot(p, true);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.epochs = 10;
  tc.max_steps = 10;
  const auto log = train(mini_examples(c, 8), p, tc, TrainMode::kAdapter);
  EXPECT_EQ(log.steps.size(), 10u);
  EXPECT_EQ(snapshot(p, false), frozen);
  int changed = 0;
  for (const auto& [n, t] : snapshot(p, true)) changed += t != before.at(n);
  EXPECT_EQ(changed, static_cast<int>(before.size()));
  p.visit([](const std::string&, Parameter& t, bool) { EXPECT_FALSE(t.requires_grad); });
}

TEST(Train, BaseTrainingLeavesAdaptersBitIdentical) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 1);
  const auto adapters = snapshot(p, true);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.epochs = 1;
  std::vector<TrainExample> ex;
  const Tokenizer tok = mini_tokenizer();
  for (const char* s : {"a b c", "d e f", "g h a"}) ex.push_back(make_text_example(tok, s));
  train(ex, p, tc, TrainMode::kBase);
  EXPECT_EQ(snapshot(p, true), adapters);
}

TEST(Train, SameSeedReplaysBitIdentically) {
  const ModelConfig c = miniature_config();
  const auto ex = mini_examples(c, 6);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 2;
  tc.seed = 9;
  auto a = ModelParams::init(c, 2);
  auto b = ModelParams::init(c, 2);
  const auto la = train(ex, a, tc, TrainMode::kAdapter);
  const auto lb = train(ex, b, tc, TrainMode::kAdapter);
  EXPECT_EQ(snapshot(a, true), snapshot(b, true));
  ASSERT_EQ(la.steps.size(), lb.steps.size());
  for (std::size_t i = 0; i < la.steps.size(); ++i) EXPECT_EQ(la.steps[i].loss, lb.steps[i].loss);
  auto d = ModelParams::init(c, 2);
  tc.seed = 10;
  train(ex, d, tc, TrainMode::kAdapter);
  EXPECT_NE(snapshot(a, true), snapshot(d, true));
}

TEST(Train, LossDecreasesOnTinySet) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 3);
  const auto ex = mini_examples(c, 4);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.epochs = 40;
  tc.optimizer = OptimizerKind::kAdamW;
  tc.learning_rate = 1e-2;
  const double start = mean_loss(ex, p, TrainMode::kAdapter);
  const auto log = train(ex, p, tc, TrainMode::kAdapter, &ex);
  EXPECT_EQ(log.epoch_eval_loss.size(), 40u);
  // The gate opens from zero, so adapter-only progress is slow at first.
  EXPECT_LT(mean_loss(ex, p, TrainMode::kAdapter), 0.8 * start);
  EXPECT_LT(log.epoch_eval_loss.back(), log.epoch_eval_loss.front());

  auto q = ModelParams::init(c, 3);
  train(ex, q, tc, TrainMode::kBase);
  EXPECT_LT(mean_loss(ex, q, TrainMode::kBase), 0.5 * start);
}

TEST(Train, BatchGradientIsTokenMean) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 4);
  for (auto& a : p.adapters) a.gate.value.data[0] = 0.3;
  const auto ex = mini_examples(c, 3);
  p.enable_adapter_training();
  p.zero_grads();
  const double loss = batch_loss_and_grad({&ex[0], &ex[1], &ex[2]}, p, TrainMode::kAdapter);
  EXPECT_NEAR(loss, mean_loss(ex, p, TrainMode::kAdapter), 1e-12);
  p.disable_grads();
}

TEST(Train, NonFiniteInputRaisesAndKeepsParameters) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 5);
  auto ex = mini_examples(c, 2);
  ex[1].rois->pixels[0] = std::nan("");
  const auto before = snapshot(p, true);
  TrainConfig tc;
  tc.batch_size = 2;
  EXPECT_THROW(train(ex, p, tc, TrainMode::kAdapter), NumericError);
  EXPECT_EQ(snapshot(p, true), before);
}

TEST(Train, DivergingParametersRestoreLastGoodState) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 5);
  const auto ex = mini_examples(c, 2);
  const auto before = snapshot(p, true);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.learning_rate = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train(ex, p, tc, TrainMode::kAdapter), NumericError);
  EXPECT_EQ(snapshot(p, true), before);
}

TEST(Train, RejectsBadConfigAndInputs) {
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 5);
  TrainConfig tc;
  tc.batch_size = 0;
  EXPECT_THROW(train(mini_examples(c, 1), p, tc, TrainMode::kAdapter), PreconditionError);
  EXPECT_THROW(train({}, p, TrainConfig{}, TrainMode::kAdapter), PreconditionError);
  auto ex = mini_examples(c, 1);
  ex[0].rois.reset();
  EXPECT_THROW(train(ex, p, TrainConfig{}, TrainMode::kAdapter), DataError);
  EXPECT_THROW(parse_optimizer("lbfgs"), PreconditionError);
  EXPECT_EQ(parse_optimizer(optimizer_name(OptimizerKind::kAdamW)), OptimizerKind::kAdamW);
}

TEST(Train, LogCsv) {
  const auto d = temp_dir("csv");
  TrainLog log;
  log.steps.push_back({1, 2.5, 0.5, 0.1});
  log.write_csv((d / "log.csv").string());
  std::ifstream in(d / "log.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "step,loss,grad_norm,seconds");
  EXPECT_EQ(row, "1,2.5,0.5,0.1");
}

TEST(Checkpoint, RoundTripRestoresEveryTensor) {
  const auto d = temp_dir("ckpt");
  const ModelConfig c = miniature_config();
  auto p = ModelParams::init(c, 6);
  p.adapters[0].gate.value.data[0] = 0.25;
  save_checkpoint(p, mini_tokenizer(), (d / "m.ckpt").string(), json{{"step", 3}});
  auto loaded = load_checkpoint((d / "m.ckpt").string());
  EXPECT_TRUE(loaded.params.config == c);
  EXPECT_EQ(snapshot(loaded.params, true), snapshot(p, true));
  EXPECT_EQ(snapshot(loaded.params, false), snapshot(p, false));
  EXPECT_EQ(loaded.extra.at("step"), 3);
  EXPECT_EQ(load_checkpoint_vocab((d / "m.ckpt").string()), mini_tokenizer());

  auto q = ModelParams::init(c, 99);
  load_checkpoint_into((d / "m.ckpt").string(), q);
  EXPECT_EQ(snapshot(q, true), snapshot(p, true));
}

TEST(Checkpoint, ShapeMismatchNamesBothShapesAndLeavesTargetUntouched) {
  const auto d = temp_dir("shape");
  ModelConfig c = miniature_config();
  save_checkpoint(ModelParams::init(c, 1), (d / "m.ckpt").string());
  c.vocab_size += 1;
  auto q = ModelParams::init(c, 2);
  const auto before = snapshot(q, false);
  try {
    load_checkpoint_into((d / "m.ckpt").string(), q);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[12,16]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[13,16]"), std::string::npos) << msg;
  }
  EXPECT_EQ(snapshot(q, false), before);
}

TEST(Checkpoint, VersionMismatchNamesBothVersions) {
  const auto d = temp_dir("version");
  const auto path = d / "m.ckpt";
  save_checkpoint(ModelParams::init(miniature_config(), 1), path.string());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const unsigned char v[4] = {7, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(v), 4);
  }
  try {
    load_checkpoint(path.string());
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("version 7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("version 1"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, TruncatedOrForeignFileIsDataError) {
  const auto d = temp_dir("trunc");
  const auto path = d / "m.ckpt";
  save_checkpoint(ModelParams::init(miniature_config(), 1), path.string());
  const auto size = fs::file_size(path);
  for (std::uintmax_t cut : {size - 1, size / 2, std::uintmax_t{6}}) {
    fs::resize_file(path, cut);
    EXPECT_THROW(load_checkpoint(path.string()), DataError) << cut;
  }
  std::ofstream(d / "junk.ckpt") << "hello world, not a checkpoint";
  EXPECT_THROW(load_checkpoint((d / "junk.ckpt").string()), DataError);
  EXPECT_THROW(load_checkpoint((d / "absent.ckpt").string()), DataError);
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  ModelConfig c = miniature_config();
  c.lip.steps = 9;
  c.encoder_layers = 3;
  EXPECT_TRUE(model_config_from_json(model_config_to_json(c)) == c);
}

TEST(GradientCheck, MiniatureModelAgreesWithFiniteDifferences) {
  auto p = ModelParams::init(miniature_config(), 11);
  for (auto& a : p.adapters) a.gate.value.data[0] = 0.4;
  const auto ex = mini_examples(miniature_config(), 1);
  for (const auto& e : gradient_check(p, ex[0], 1e-5, 6, 3)) EXPECT_LT(e.rel_err, 1e-4) << e.name;
}

}  // namespace
}  // namespace lipger
