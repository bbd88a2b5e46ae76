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

#include "lipger/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace lipger {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'G', 'E', 'R'};
constexpr std::uint8_t kDtypeF64 = 1;

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

class Reader {
 public:
  Reader(std::string bytes, std::string path) : b_(std::move(bytes)), path_(std::move(path)) {}

  void read(void* dst, std::size_t n) {
    if (n > b_.size() - pos_) throw DataError(path_ + ": truncated checkpoint");
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, 4);
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  bool at_end() const { return pos_ == b_.size(); }

 private:
  std::string b_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct Parsed {
  json meta;
  std::map<std::string, Tensor> tensors;
};

Parsed parse(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str(), path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(path + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw DataError(path + ": checkpoint format version " + std::to_string(version) + ", this build reads version " +
                    std::to_string(kCheckpointVersion));
  Parsed p;
  const std::uint32_t meta_len = r.u32();
  try {
    p.meta = json::parse(r.str(meta_len));
  } catch (const json::exception& e) {
    throw DataError(path + ": bad metadata: " + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u32());
    std::uint8_t dtype;
    r.read(&dtype, 1);
    if (dtype != kDtypeF64) throw DataError(path + ": tensor " + name + " has unsupported dtype " + std::to_string(dtype));
    const std::uint32_t ndim = r.u32();
    if (ndim > 8) throw DataError(path + ": tensor " + name + " has implausible rank");
    std::vector<int> shape;
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int>(r.u32()));
      n *= static_cast<std::size_t>(shape.back());
    }
    if (n > (std::size_t{1} << 32)) throw DataError(path + ": tensor " + name + " is implausibly large");
    std::vector<double> data(n);
    r.read(data.data(), n * sizeof(double));
    if (!p.tensors.emplace(name, Tensor(std::move(shape), std::move(data))).second)
      throw DataError(path + ": duplicate tensor " + name);
  }
  if (!r.at_end()) throw DataError(path + ": trailing bytes after tensors");
  return p;
}

void assign(const Parsed& parsed, ModelParams& params, const std::string& path) {
  std::size_t used = 0;
  std::string err;
  params.visit([&](const std::string& name, Parameter& p, bool) {
    if (!err.empty()) return;
    auto it = parsed.tensors.find(name);
    if (it == parsed.tensors.end()) {
      err = path + ": missing tensor " + name;
      return;
    }
    if (it->second.shape != p.value.shape) {
      err = path + ": shape mismatch for " + name + ": checkpoint " + it->second.shape_str() + ", model " +
            p.value.shape_str();
      return;
    }
    ++used;
  });
  if (!err.empty()) throw DataError(err);
  if (used != parsed.tensors.size()) throw DataError(path + ": checkpoint holds tensors the model does not have");
  params.visit([&](const std::string& name, Parameter& p, bool) {
    p.value = parsed.tensors.at(name);
    p.zero_grad();
  });
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  json lip = json::object();
  lip["roi_height"] = c.lip.roi_height;
  lip["roi_width"] = c.lip.roi_width;
  lip["stem_channels"] = c.lip.stem_channels;
  lip["stem_kernel_t"] = c.lip.stem_kernel_t;
  lip["stem_kernel_hw"] = c.lip.stem_kernel_hw;
  lip["blocks"] = c.lip.blocks;
  lip["tcn_levels"] = c.lip.tcn_levels;
  lip["tcn_kernel"] = c.lip.tcn_kernel;
  lip["feature_dim"] = c.lip.feature_dim;
  lip["steps"] = c.lip.steps;
  json j = json::object();
  j["vocab_size"] = c.vocab_size;
  j["dim"] = c.dim;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["ff_mult"] = c.ff_mult;
  j["max_len"] = c.max_len;
  j["prompt_len"] = c.prompt_len;
  j["encoder_layers"] = c.encoder_layers;
  j["lip"] = lip;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.dim = j.at("dim").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ff_mult = j.at("ff_mult").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.prompt_len = j.at("prompt_len").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    const json& l = j.at("lip");
    c.lip.roi_height = l.at("roi_height").get<int>();
    c.lip.roi_width = l.at("roi_width").get<int>();
    c.lip.stem_channels = l.at("stem_channels").get<int>();
    c.lip.stem_kernel_t = l.at("stem_kernel_t").get<int>();
    c.lip.stem_kernel_hw = l.at("stem_kernel_hw").get<int>();
    c.lip.blocks = l.at("blocks").get<int>();
    c.lip.tcn_levels = l.at("tcn_levels").get<int>();
    c.lip.tcn_kernel = l.at("tcn_kernel").get<int>();
    c.lip.feature_dim = l.at("feature_dim").get<int>();
    c.lip.steps = l.at("steps").get<int>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad model config: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& params, const std::string& path, const json& extra) {
  json meta = json::object();
  meta["format"] = "lipger-checkpoint";
  meta["config"] = model_config_to_json(params.config);
  meta["extra"] = extra;
  const std::string meta_s = meta.dump();

  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(meta_s.size()));
  os.write(meta_s.data(), static_cast<std::streamsize>(meta_s.size()));
  std::uint32_t count = 0;
  params.visit([&](const std::string&, const Parameter&, bool) { ++count; });
  put_u32(os, count);
  params.visit([&](const std::string& name, const Parameter& p, bool) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(kDtypeF64));
    put_u32(os, static_cast<std::uint32_t>(p.value.shape.size()));
    for (int d : p.value.shape) put_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(p.value.data.data()),
             static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
  });
  // Write-then-rename so readers never observe a half-written file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    const std::string bytes = os.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const ModelParams& params, const Tokenizer& tok, const std::string& path, const json& extra) {
  LIPGER_REQUIRE(tok.size() == params.config.vocab_size, "save_checkpoint: tokenizer size differs from model vocab");
  save_checkpoint(params, path, extra);
  tok.save(path + ".vocab");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Parsed parsed = parse(path);
  LoadedCheckpoint out;
  out.params = ModelParams::init(model_config_from_json(parsed.meta.at("config")), 0);
  assign(parsed, out.params, path);
  if (parsed.meta.contains("extra")) out.extra = parsed.meta["extra"];
  return out;
}

void load_checkpoint_into(const std::string& path, ModelParams& params) {
  Parsed parsed = parse(path);
  assign(parsed, params, path);
}

Tokenizer load_checkpoint_vocab(const std::string& checkpoint_path) { return Tokenizer::load(checkpoint_path + ".vocab"); }

}  // namespace lipger
