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

#ifndef LIPGER_SELFTEST_HPP_
#define LIPGER_SELFTEST_HPP_

// Built-in oracle suites run by the `selftest` subcommand.

#include <iosfwd>
#include <string>
#include <vector>

#include "lipger/model.hpp"
#include "lipger/trainer.hpp"

namespace lipger {

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// C=16, L=2, K=4, V=6, T=1 over a 12-symbol vocabulary with a tiny lip encoder.
ModelConfig miniature_config();

struct TensorGradError {
  std::string name;
  double rel_err = 0.0;
};

// Central differences against backprop for every trainable tensor.
// `max_elems` > 0 samples that many coordinates per tensor.
std::vector<TensorGradError> gradient_check(ModelParams& params, const TrainExample& ex, double h,
                                            std::size_t max_elems, std::uint64_t seed);

std::vector<SuiteResult> run_selftest(std::ostream* log);

}  // namespace lipger

#endif  // LIPGER_SELFTEST_HPP_
