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

#ifndef LIPGER_CHECKPOINT_HPP_
#define LIPGER_CHECKPOINT_HPP_

// Versioned binary parameter container.
//
//   "LGER" | u32 version | u32 meta_len | meta (JSON) | u32 count |
//   count x ( u32 name_len | name | u8 dtype | u32 ndim | u32 dims[ndim] | data )
//
// All integers little-endian; dtype 1 is float64. The tokenizer vocabulary
// is written next to the file as "<path>.vocab".

#include <cstdint>
#include <string>

#include "lipger/corpus.hpp"
#include "lipger/model.hpp"
#include "lipger/tokenizer.hpp"

namespace lipger {

inline constexpr std::uint32_t kCheckpointVersion = 1;

json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const json& j);

// `extra` is stored under "extra" in the metadata block.
void save_checkpoint(const ModelParams& params, const std::string& path, const json& extra = json::object());
void save_checkpoint(const ModelParams& params, const Tokenizer& tok, const std::string& path,
                     const json& extra = json::object());

struct LoadedCheckpoint {
  ModelParams params;
  json extra;
};

// Rebuilds parameters from the stored config.
LoadedCheckpoint load_checkpoint(const std::string& path);
// Overwrites `params` in place. Every tensor must exist with the same shape;
// on any error `params` is left untouched.
void load_checkpoint_into(const std::string& path, ModelParams& params);

Tokenizer load_checkpoint_vocab(const std::string& checkpoint_path);

}  // namespace lipger

#endif  // LIPGER_CHECKPOINT_HPP_
