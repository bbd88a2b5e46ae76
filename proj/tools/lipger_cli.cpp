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

// lipger command-line driver.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lipger/common.hpp"
#include "lipger/config.hpp"
#include "lipger/pipeline.hpp"
#include "lipger/selftest.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::string workdir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  bool force = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "INI config file")->check(CLI::ExistingFile);
  sub->add_option("-w,--workdir", c.workdir, "working directory (overrides paths.workdir)");
  sub->add_option("--seed", c.seed, "global seed (overrides run.seed)");
  sub->add_option("--set", c.sets, "override any key: section.key=value")->allow_extra_args(false);
  sub->add_flag("--force", c.force, "consume upstream artifacts stamped under a different config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lip-conditioned generative error correction pipeline"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::string> flag_sets;

  for (const char* stage : {"simulate", "decode", "build", "pretrain-lm", "train", "eval", "report"}) {
    auto* sub = app.add_subcommand(stage, std::string("run the ") + stage + " stage");
    add_common(sub, common);
    if (std::string(stage) == "decode") {
      sub->add_option_function<int>("--beam-width", [&](int v) { flag_sets.push_back("decode.beam_width=" + std::to_string(v)); },
                                    "beam width");
      sub->add_option_function<int>("--nbest", [&](int v) { flag_sets.push_back("decode.n_plus_1=" + std::to_string(v)); },
                                    "hypotheses per list (N+1)");
    }
    if (std::string(stage) == "train" || std::string(stage) == "pretrain-lm") {
      const std::string sec = std::string(stage) == "train" ? "train." : "pretrain.";
      auto str = [&flag_sets, sec](const char* key) {
        return [&flag_sets, sec, key](const std::string& v) { flag_sets.push_back(sec + key + "=" + v); };
      };
      sub->add_option_function<std::string>("--lr", str("learning_rate"), "learning rate");
      sub->add_option_function<std::string>("--weight-decay", str("weight_decay"), "decoupled weight decay");
      sub->add_option_function<std::string>("--batch-size", str("batch_size"), "batch size");
      sub->add_option_function<std::string>("--epochs", str("epochs"), "epochs");
      sub->add_option_function<std::string>("--momentum", str("momentum"), "momentum");
      sub->add_option_function<std::string>("--clip-norm", str("clip_norm"), "gradient clip norm");
      sub->add_option_function<std::string>("--optimizer", str("optimizer"), "sgd or adamw");
      sub->add_option_function<std::string>("--max-steps", str("max_steps"), "step cap (0 = none)");
    }
    if (std::string(stage) == "eval")
      sub->add_option_function<std::string>("--systems", [&](const std::string& v) { flag_sets.push_back("eval.systems=" + v); },
                                            "comma list of onebest,lm,ger,lipger");
  }
  app.add_subcommand("selftest", "run the built-in oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "selftest") {
      bool ok = true;
      for (const auto& r : lipger::run_selftest(&std::cout)) ok = ok && r.pass;
      std::cout << (ok ? "selftest: all suites passed" : "selftest: FAILED") << std::endl;
      return ok ? kOk : kNumeric;
    }
    lipger::PipelineConfig cfg = common.config.empty() ? lipger::PipelineConfig() : lipger::load_config(common.config);
    std::vector<std::string> overrides = common.sets;
    overrides.insert(overrides.end(), flag_sets.begin(), flag_sets.end());
    if (!common.workdir.empty()) overrides.push_back("paths.workdir=" + common.workdir);
    if (common.seed) overrides.push_back("run.seed=" + std::to_string(*common.seed));
    lipger::apply_overrides(cfg, overrides);
    lipger::Pipeline pipeline(cfg, common.force, &std::cerr);
    const auto outcome = pipeline.run(name);
    std::cout << name << ": " << (outcome.noop ? "no-op (up to date)" : "done") << " [" << outcome.hash << "]"
              << std::endl;
    return kOk;
  } catch (const lipger::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return kNumeric;
  } catch (const lipger::DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kData;
  } catch (const lipger::PreconditionError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kData;
  }
}
