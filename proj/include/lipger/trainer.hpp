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

#ifndef LIPGER_TRAINER_HPP_
#define LIPGER_TRAINER_HPP_

// Mini-batch training of either parameter partition.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lipger/corpus.hpp"
#include "lipger/lip_encoder.hpp"
#include "lipger/model.hpp"
#include "lipger/tokenizer.hpp"

namespace lipger {

enum class OptimizerKind { kSgdMomentum, kAdamW };
std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
  double learning_rate = 5e-3;
  double weight_decay = 0.02;
  int batch_size = 32;
  int epochs = 2;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  int max_steps = 0;  // 0: no cap

  void validate() const;
};

struct TrainStepLog {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double seconds = 0.0;    // wall time since start
};

struct TrainLog {
  std::vector<TrainStepLog> steps;
  std::vector<double> epoch_eval_loss;

  void write_csv(const std::string& path) const;
};

// One teacher-forced sequence: BOS prompt response EOS, shifted by one.
// The mask selects positions that predict response tokens and EOS.
struct TrainExample {
  std::vector<int> input;
  std::vector<int> target;
  std::vector<char> mask;
  std::optional<PreparedRois> rois;
};

TrainExample make_example(const Tokenizer& tok, const InstructionSample& sample,
                          std::optional<PreparedRois> rois = std::nullopt);
// "BOS text EOS" with every position in the loss.
TrainExample make_text_example(const Tokenizer& tok, const std::string& text);

enum class TrainMode {
  kAdapter,  // adapters, prompt encoder, projection and lip encoder
  kBase,     // embeddings, decoder and output projection
};

// Token-mean loss of one batch with gradients accumulated into `params`.
double batch_loss_and_grad(const std::vector<const TrainExample*>& batch, ModelParams& params, TrainMode mode);
// Token-mean loss without gradients.
double mean_loss(const std::vector<TrainExample>& examples, ModelParams& params, TrainMode mode);

// Updates only the partition selected by `mode`; every other tensor stays
// bit-identical. Batch order is a function of config.seed. A non-finite loss
// restores the last good parameters and throws NumericError.
TrainLog train(const std::vector<TrainExample>& examples, ModelParams& params, const TrainConfig& config,
               TrainMode mode, const std::vector<TrainExample>* eval_examples = nullptr,
               const std::function<void(const TrainStepLog&)>& on_step = {});

}  // namespace lipger

#endif  // LIPGER_TRAINER_HPP_
