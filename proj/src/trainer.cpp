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

#include "lipger/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace lipger {

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::kAdamW ? "adamw" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgdMomentum;
  if (s == "adamw") return OptimizerKind::kAdamW;
  throw PreconditionError("unknown optimizer '" + std::string(s) + "' (expected sgd or adamw)");
}

void TrainConfig::validate() const {
  LIPGER_REQUIRE(learning_rate >= 0.0, "TrainConfig: learning_rate must be >= 0");
  LIPGER_REQUIRE(weight_decay >= 0.0, "TrainConfig: weight_decay must be >= 0");
  LIPGER_REQUIRE(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  LIPGER_REQUIRE(epochs >= 1, "TrainConfig: epochs must be >= 1");
  LIPGER_REQUIRE(clip_norm > 0.0, "TrainConfig: clip_norm must be > 0");
  LIPGER_REQUIRE(momentum >= 0.0 && momentum < 1.0, "TrainConfig: momentum must be in [0, 1)");
  LIPGER_REQUIRE(max_steps >= 0, "TrainConfig: max_steps must be >= 0");
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "step,loss,grad_norm,seconds\n" << std::setprecision(10);
  for (const auto& s : steps) out << s.step << ',' << s.loss << ',' << s.grad_norm << ',' << s.seconds << '\n';
}

TrainExample make_example(const Tokenizer& tok, const InstructionSample& sample, std::optional<PreparedRois> rois) {
  const auto prompt = tok.tokenize(sample.prompt);
  const auto response = tok.tokenize(sample.response);
  std::vector<int> ids;
  ids.push_back(Tokenizer::kBos);
  ids.insert(ids.end(), prompt.begin(), prompt.end());
  ids.insert(ids.end(), response.begin(), response.end());
  ids.push_back(Tokenizer::kEos);
  TrainExample ex;
  ex.input.assign(ids.begin(), ids.end() - 1);
  ex.target.assign(ids.begin() + 1, ids.end());
  ex.mask.assign(ex.target.size(), 0);
  // Position i predicts ids[i+1]; the response starts at ids[1 + |prompt|].
  for (std::size_t i = prompt.size(); i < ex.target.size(); ++i) ex.mask[i] = 1;
  ex.rois = std::move(rois);
  return ex;
}

TrainExample make_text_example(const Tokenizer& tok, const std::string& text) {
  std::vector<int> ids{Tokenizer::kBos};
  for (int id : tok.tokenize(text)) ids.push_back(id);
  ids.push_back(Tokenizer::kEos);
  TrainExample ex;
  ex.input.assign(ids.begin(), ids.end() - 1);
  ex.target.assign(ids.begin() + 1, ids.end());
  ex.mask.assign(ex.target.size(), 1);
  return ex;
}

namespace {

std::size_t mask_count(const TrainExample& ex) {
  std::size_t n = 0;
  for (char m : ex.mask) n += m != 0;
  return n;
}

Var example_logits(Tape& tape, const TrainExample& ex, ModelParams& params, TrainMode mode) {
  if (mode == TrainMode::kBase) return base_forward(tape, ex.input, params);
  if (!ex.rois) throw DataError("adapter training example has no lip ROI sequence");
  Var e = encode_lips(tape, *ex.rois, params.lip);
  return adapter_forward(tape, ex.input, e, params);
}

void set_partition(ModelParams& params, TrainMode mode) {
  if (mode == TrainMode::kAdapter)
    params.enable_adapter_training();
  else
    params.enable_base_training();
}

struct Slot {
  Parameter* p;
  bool decay;
  Tensor m1, m2;
};

}  // namespace

double batch_loss_and_grad(const std::vector<const TrainExample*>& batch, ModelParams& params, TrainMode mode) {
  std::size_t tokens = 0;
  for (const auto* ex : batch) tokens += mask_count(*ex);
  LIPGER_REQUIRE(tokens > 0, "batch has no loss positions");
  const double scale = 1.0 / static_cast<double>(tokens);
  double loss = 0.0;
  for (const auto* ex : batch) {
    Tape tape;
    Var logits = example_logits(tape, *ex, params, mode);
    Var l = cross_entropy(logits, ex->target, ex->mask, scale);
    loss += l.value().data[0];
    tape.backward(l);
  }
  return loss;
}

double mean_loss(const std::vector<TrainExample>& examples, ModelParams& params, TrainMode mode) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    Tape tape;
    Var logits = example_logits(tape, ex, params, mode);
    total += cross_entropy(logits, ex.target, ex.mask, 1.0).value().data[0];
    tokens += mask_count(ex);
  }
  LIPGER_REQUIRE(tokens > 0, "mean_loss: no loss positions");
  return total / static_cast<double>(tokens);
}

TrainLog train(const std::vector<TrainExample>& examples, ModelParams& params, const TrainConfig& config,
               TrainMode mode, const std::vector<TrainExample>* eval_examples,
               const std::function<void(const TrainStepLog&)>& on_step) {
  config.validate();
  LIPGER_REQUIRE(!examples.empty(), "train: empty sample set");
  for (const auto& ex : examples) {
    LIPGER_REQUIRE(ex.input.size() == ex.target.size() && ex.mask.size() == ex.target.size(),
                   "train: malformed example");
    for (int id : ex.input)
      LIPGER_REQUIRE(id >= 0 && id < params.config.vocab_size, "train: token id outside the model vocabulary");
  }
  set_partition(params, mode);

  std::vector<Slot> slots;
  params.visit([&](const std::string&, Parameter& p, bool) {
    // Gates, biases and norm parameters are 1-D and never decayed.
    if (p.requires_grad) slots.push_back({&p, p.value.rank() >= 2, Tensor(p.value.shape), Tensor(p.value.shape)});
  });

  TrainLog log;
  const auto t0 = std::chrono::steady_clock::now();
  int step = 0;
  bool done = false;
  std::vector<std::size_t> order(examples.size());
  std::vector<Tensor> snapshot(slots.size());
  for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(config.seed, "shuffle/" + std::to_string(epoch)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size() && !done; start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<const TrainExample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&examples[order[i]]);

      for (auto& s : slots) s.p->zero_grad();
      const double loss = batch_loss_and_grad(batch, params, mode);
      double sq = 0.0;
      for (const auto& s : slots)
        for (double g : s.p->grad.data) sq += g * g;
      const double norm = std::sqrt(sq);
      if (!std::isfinite(loss) || !std::isfinite(norm))
        throw NumericError("non-finite loss at step " + std::to_string(step + 1) +
                           "; parameters hold the last good state");
      for (std::size_t k = 0; k < slots.size(); ++k) snapshot[k] = slots[k].p->value;

      const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
      const double lr = config.learning_rate;
      ++step;
      for (auto& s : slots) {
        auto& w = s.p->value.data;
        const auto& g = s.p->grad.data;
        const double wd = s.decay ? config.weight_decay : 0.0;
        if (config.optimizer == OptimizerKind::kSgdMomentum) {
          for (std::size_t i = 0; i < w.size(); ++i) {
            s.m1.data[i] = config.momentum * s.m1.data[i] + clip * g[i];
            w[i] -= lr * (s.m1.data[i] + wd * w[i]);
          }
        } else {
          const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
          const double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
          for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = clip * g[i];
            s.m1.data[i] = b1 * s.m1.data[i] + (1.0 - b1) * gi;
            s.m2.data[i] = b2 * s.m2.data[i] + (1.0 - b2) * gi * gi;
            w[i] -= lr * ((s.m1.data[i] / c1) / (std::sqrt(s.m2.data[i] / c2) + eps) + wd * w[i]);
          }
        }
      }
      bool finite = true;
      for (const auto& s : slots)
        for (double x : s.p->value.data) finite = finite && std::isfinite(x);
      if (!finite) {
        for (std::size_t k = 0; k < slots.size(); ++k) slots[k].p->value = snapshot[k];
        throw NumericError("parameters diverged at step " + std::to_string(step) +
                           "; restored the last good state");
      }
      TrainStepLog entry{step, loss, norm,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      log.steps.push_back(entry);
      if (on_step) on_step(entry);
      if (config.max_steps > 0 && step >= config.max_steps) done = true;
    }
    if (eval_examples != nullptr && !eval_examples->empty())
      log.epoch_eval_loss.push_back(mean_loss(*eval_examples, params, mode));
  }
  for (auto& s : slots) s.p->zero_grad();
  params.disable_grads();
  return log;
}

}  // namespace lipger
