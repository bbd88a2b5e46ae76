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

#ifndef LIPGER_LIP_ENCODER_HPP_
#define LIPGER_LIP_ENCODER_HPP_

// Mouth-ROI encoder: 3-D convolution stem, channel-split/shuffle separable
// blocks, a residual dilated temporal convolution stack, and linear
// resampling onto a fixed number of time steps.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lipger/autograd.hpp"

namespace lipger {

// Grayscale frames, row-major [frame][row][col], values in [0, 1].
struct RoiSequence {
  int frames = 0;
  int height = 0;
  int width = 0;
  double frame_rate_hz = 25.0;
  std::vector<double> pixels;

  void validate() const;
  double pixel(int m, int y, int x) const {
    return pixels[(static_cast<std::size_t>(m) * height + y) * width + x];
  }
};

// Resized, mean/std-normalised frames ready for the encoder.
struct PreparedRois {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;
};

struct LipEncoderConfig {
  int roi_height = 88;
  int roi_width = 88;
  int stem_channels = 32;
  int stem_kernel_t = 3;
  int stem_kernel_hw = 5;
  int blocks = 2;
  int tcn_levels = 2;
  int tcn_kernel = 3;
  int feature_dim = 64;  // C_lip
  int steps = 16;        // V

  void validate() const;
};

struct LipEncoderParams {
  struct Block {
    Parameter pw1_w, pw1_b, dw_w, dw_b, pw2_w, pw2_b;
  };
  struct TcnLevel {
    Parameter conv_w, conv_b;
    Parameter res_w, res_b;  // empty unless the width changes
  };

  LipEncoderConfig config;
  Parameter stem_w, stem_b;
  std::vector<Block> blocks;
  std::vector<TcnLevel> tcn;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static LipEncoderParams init(const LipEncoderConfig& config, std::uint64_t seed);
  void visit(const std::function<void(const std::string&, Parameter&)>& fn);
};

// Bilinear resize (half-pixel centres) then per-sequence mean/std
// normalisation. A constant sequence normalises to all zeros.
PreparedRois preprocess_rois(const RoiSequence& rois, int target_h, int target_w);

// V x m interpolation matrix onto V equispaced points spanning the input.
Tensor resample_matrix(int input_steps, int output_steps);
// Linear interpolation of an [M', C] sequence to [V, C].
Tensor resample_temporal(const Tensor& sequence, int steps);

// Differentiable forward pass; returns E as a [V, C_lip] node on `tape`.
Var encode_lips(Tape& tape, const PreparedRois& rois, LipEncoderParams& params);
// Inference convenience wrapper.
Tensor encode_lips(const PreparedRois& rois, LipEncoderParams& params);

// ---- ROI file formats ------------------------------------------------------
// Raw tensor: M, H, W as little-endian u32, then M*H*W row-major bytes.
RoiSequence read_roi_raw(const std::string& path);
void write_roi_raw(const std::string& path, const RoiSequence& rois);
// Directory of 8-bit grayscale PNG frames, read in filename order.
RoiSequence read_roi_png_dir(const std::string& dir);
void write_roi_png_dir(const std::string& dir, const RoiSequence& rois);
RoiSequence read_roi(const std::string& ref, const std::string& format);

}  // namespace lipger

#endif  // LIPGER_LIP_ENCODER_HPP_
