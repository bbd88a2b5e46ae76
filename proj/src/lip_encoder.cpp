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

#include "lipger/lip_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "lipger/common.hpp"

namespace lipger {

namespace {

Parameter uniform_param(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : t.data) x = rng.uniform(-a, a);
  return Parameter(std::move(t));
}

Parameter zeros(std::vector<int> shape) { return Parameter(Tensor(std::move(shape))); }

}  // namespace

void RoiSequence::validate() const {
  if (frames < 1) throw PreconditionError("RoiSequence: needs at least one frame");
  if (height < 1 || width < 1) throw PreconditionError("RoiSequence: empty frame size");
  if (pixels.size() != static_cast<std::size_t>(frames) * height * width)
    throw PreconditionError("RoiSequence: pixel count does not match M x H x W");
  for (double p : pixels)
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("RoiSequence: pixel outside [0, 1]");
  if (!(frame_rate_hz > 0.0)) throw PreconditionError("RoiSequence: frame rate must be positive");
}

void LipEncoderConfig::validate() const {
  LIPGER_REQUIRE(roi_height > 0 && roi_width > 0, "LipEncoderConfig: ROI size must be positive");
  LIPGER_REQUIRE(stem_channels >= 2 && stem_channels % 2 == 0, "LipEncoderConfig: stem_channels must be even");
  LIPGER_REQUIRE(stem_kernel_t >= 1 && stem_kernel_hw >= 1 && stem_kernel_hw % 2 == 1,
                 "LipEncoderConfig: stem kernel must be positive with odd spatial size");
  LIPGER_REQUIRE(blocks >= 0 && tcn_levels >= 1, "LipEncoderConfig: need at least one TCN level");
  LIPGER_REQUIRE(tcn_kernel >= 1 && tcn_kernel % 2 == 1, "LipEncoderConfig: TCN kernel must be odd");
  LIPGER_REQUIRE(feature_dim >= 1 && steps >= 1, "LipEncoderConfig: feature_dim and steps must be positive");
}

LipEncoderParams LipEncoderParams::init(const LipEncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, "lip_encoder"));
  LipEncoderParams p;
  p.config = cfg;
  const int c = cfg.stem_channels;
  const int kt = cfg.stem_kernel_t, k = cfg.stem_kernel_hw;
  p.stem_w = uniform_param({c, 1, kt, k, k}, kt * k * k, rng);
  p.stem_b = zeros({c});
  const int h = c / 2;
  for (int b = 0; b < cfg.blocks; ++b) {
    Block blk;
    blk.pw1_w = uniform_param({h, h, 1, 1, 1}, h, rng);
    blk.pw1_b = zeros({h});
    blk.dw_w = uniform_param({h, 1, 1, 3, 3}, 9, rng);
    blk.dw_b = zeros({h});
    blk.pw2_w = uniform_param({h, h, 1, 1, 1}, h, rng);
    blk.pw2_b = zeros({h});
    p.blocks.push_back(std::move(blk));
  }
  int cin = c;
  for (int l = 0; l < cfg.tcn_levels; ++l) {
    TcnLevel lv;
    const int cout = cfg.feature_dim;
    lv.conv_w = uniform_param({cout, cin, cfg.tcn_kernel, 1, 1}, cin * cfg.tcn_kernel, rng);
    lv.conv_b = zeros({cout});
    if (cin != cout) {
      lv.res_w = uniform_param({cout, cin, 1, 1, 1}, cin, rng);
      lv.res_b = zeros({cout});
    }
    p.tcn.push_back(std::move(lv));
    cin = cout;
  }
  return p;
}

void LipEncoderParams::visit(const std::function<void(const std::string&, Parameter&)>& fn) {
  fn("lip.stem.w", stem_w);
  fn("lip.stem.b", stem_b);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string pre = "lip.block" + std::to_string(i) + ".";
    fn(pre + "pw1.w", blocks[i].pw1_w);
    fn(pre + "pw1.b", blocks[i].pw1_b);
    fn(pre + "dw.w", blocks[i].dw_w);
    fn(pre + "dw.b", blocks[i].dw_b);
    fn(pre + "pw2.w", blocks[i].pw2_w);
    fn(pre + "pw2.b", blocks[i].pw2_b);
  }
  for (std::size_t i = 0; i < tcn.size(); ++i) {
    const std::string pre = "lip.tcn" + std::to_string(i) + ".";
    fn(pre + "conv.w", tcn[i].conv_w);
    fn(pre + "conv.b", tcn[i].conv_b);
    if (!tcn[i].res_w.value.data.empty()) {
      fn(pre + "res.w", tcn[i].res_w);
      fn(pre + "res.b", tcn[i].res_b);
    }
  }
}

PreparedRois preprocess_rois(const RoiSequence& rois, int target_h, int target_w) {
  if (rois.frames < 1 || rois.pixels.empty()) throw PreconditionError("preprocess_rois: empty ROI sequence");
  rois.validate();
  LIPGER_REQUIRE(target_h > 0 && target_w > 0, "preprocess_rois: target size must be positive");
  PreparedRois out;
  out.frames = rois.frames;
  out.height = target_h;
  out.width = target_w;
  out.pixels.resize(static_cast<std::size_t>(rois.frames) * target_h * target_w);
  const double sy = static_cast<double>(rois.height) / target_h;
  const double sx = static_cast<double>(rois.width) / target_w;
  auto src_coord = [](int o, double s, int n, int& i0, int& i1, double& frac) {
    double c = (o + 0.5) * s - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<int>(std::floor(c));
    i1 = std::min(i0 + 1, n - 1);
    frac = c - i0;
  };
  std::size_t o = 0;
  for (int m = 0; m < rois.frames; ++m)
    for (int y = 0; y < target_h; ++y) {
      int y0, y1;
      double fy;
      src_coord(y, sy, rois.height, y0, y1, fy);
      for (int x = 0; x < target_w; ++x) {
        int x0, x1;
        double fx;
        src_coord(x, sx, rois.width, x0, x1, fx);
        const double top = (1 - fx) * rois.pixel(m, y0, x0) + fx * rois.pixel(m, y0, x1);
        const double bot = (1 - fx) * rois.pixel(m, y1, x0) + fx * rois.pixel(m, y1, x1);
        out.pixels[o++] = (1 - fy) * top + fy * bot;
      }
    }
  double mean = 0.0;
  for (double p : out.pixels) mean += p;
  mean /= static_cast<double>(out.pixels.size());
  double var = 0.0;
  for (double p : out.pixels) var += (p - mean) * (p - mean);
  var /= static_cast<double>(out.pixels.size());
  const double sd = std::sqrt(var);
  for (double& p : out.pixels) p = sd > 1e-12 ? (p - mean) / sd : p - mean;
  return out;
}

Tensor resample_matrix(int input_steps, int output_steps) {
  LIPGER_REQUIRE(input_steps >= 1 && output_steps >= 1, "resample_temporal: lengths must be >= 1");
  Tensor r({output_steps, input_steps});
  for (int v = 0; v < output_steps; ++v) {
    const double pos = output_steps == 1 ? 0.5 * (input_steps - 1)
                                         : static_cast<double>(v) * (input_steps - 1) / (output_steps - 1);
    const int i0 = std::min(static_cast<int>(std::floor(pos)), input_steps - 1);
    const int i1 = std::min(i0 + 1, input_steps - 1);
    const double f = pos - i0;
    r.at(v, i0) += 1.0 - f;
    if (f > 0.0) r.at(v, i1) += f;
  }
  return r;
}

Tensor resample_temporal(const Tensor& sequence, int steps) {
  LIPGER_REQUIRE(sequence.rank() == 2 && sequence.rows() >= 1, "resample_temporal: expected [M', C] with M' >= 1");
  const Tensor r = resample_matrix(sequence.rows(), steps);
  Tensor out({steps, sequence.cols()});
  for (int v = 0; v < steps; ++v)
    for (int i = 0; i < sequence.rows(); ++i) {
      const double w = r.at(v, i);
      if (w == 0.0) continue;
      for (int c = 0; c < sequence.cols(); ++c) out.at(v, c) += w * sequence.at(i, c);
    }
  return out;
}

Var encode_lips(Tape& tape, const PreparedRois& rois, LipEncoderParams& p) {
  const LipEncoderConfig& cfg = p.config;
  LIPGER_REQUIRE(rois.frames >= 1, "encode_lips: empty ROI sequence");
  Var x = tape.constant(Tensor({1, rois.frames, rois.height, rois.width}, rois.pixels));
  // Left-pad by repetition so every frame has a full temporal receptive field.
  x = pad_time_replicate_left(x, cfg.stem_kernel_t - 1);
  Conv3dOpts stem;
  stem.stride_h = stem.stride_w = 2;
  stem.pad_h = stem.pad_w = cfg.stem_kernel_hw / 2;
  x = silu(conv3d(x, tape.param(p.stem_w), tape.param(p.stem_b), stem));

  const int half = cfg.stem_channels / 2;
  Conv3dOpts dw;
  dw.pad_h = dw.pad_w = 1;
  dw.groups = half;
  for (auto& blk : p.blocks) {
    Var keep = channel_slice(x, 0, half);
    Var br = channel_slice(x, half, half);
    br = silu(conv3d(br, tape.param(blk.pw1_w), tape.param(blk.pw1_b), {}));
    br = conv3d(br, tape.param(blk.dw_w), tape.param(blk.dw_b), dw);
    br = silu(conv3d(br, tape.param(blk.pw2_w), tape.param(blk.pw2_b), {}));
    x = channel_shuffle(channel_concat(keep, br), 2);
  }

  Var f = spatial_mean(x);  // [C, M]
  const int m = f.value().dim(1);
  f = reshape(f, {f.value().dim(0), m, 1, 1});
  int dilation = 1;
  for (auto& lv : p.tcn) {
    Conv3dOpts o;
    o.dil_t = dilation;
    o.pad_t = dilation * (cfg.tcn_kernel - 1) / 2;
    Var y = silu(conv3d(f, tape.param(lv.conv_w), tape.param(lv.conv_b), o));
    Var res = lv.res_w.value.data.empty() ? f : conv3d(f, tape.param(lv.res_w), tape.param(lv.res_b), {});
    f = add(y, res);
    dilation *= 2;
  }
  Var seq = transpose(reshape(f, {cfg.feature_dim, m}));  // [M, C_lip]
  return matmul(tape.constant(resample_matrix(m, cfg.steps)), seq);
}

Tensor encode_lips(const PreparedRois& rois, LipEncoderParams& params) {
  Tape tape;
  return encode_lips(tape, rois, params).value();
}

}  // namespace lipger
