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

#ifndef LIPGER_PIPELINE_HPP_
#define LIPGER_PIPELINE_HPP_

// Stage runner. Each stage owns <workdir>/<stage>/ and writes stamp.json with
// a config hash chained from its upstream stage. A stage whose stamp already
// matches is a no-op; upstream artifacts stamped under a different config
// are refused unless forced.

#include <iosfwd>
#include <string>
#include <vector>

#include "lipger/config.hpp"

namespace lipger {

// simulate, decode, build, pretrain-lm, train, eval, report
const std::vector<std::string>& pipeline_stages();

struct StageOutcome {
  std::string stage;
  bool noop = false;
  std::string hash;
};

class Pipeline {
 public:
  // `log` may be null.
  Pipeline(PipelineConfig config, bool force = false, std::ostream* log = nullptr);

  StageOutcome run(const std::string& stage);
  std::vector<StageOutcome> run_all();

  std::string stage_dir(const std::string& stage) const;
  // Hash the stage would carry under the current config.
  std::string expected_hash(const std::string& stage) const;
  const PipelineConfig& config() const { return cfg_; }

 private:
  void simulate();
  void decode();
  void build();
  void pretrain();
  void train();
  void eval();
  void report();

  std::string source_dir() const;
  std::string path(const std::string& rel) const;
  void log(const std::string& msg) const;

  PipelineConfig cfg_;
  bool force_;
  std::ostream* log_;
  std::string upstream_hash_;
  std::string current_hash_;
};

}  // namespace lipger

#endif  // LIPGER_PIPELINE_HPP_
