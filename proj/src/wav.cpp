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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lipger/audio.hpp"
#include "lipger/common.hpp"

namespace lipger {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void wr_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip resample_nearest(const AudioClip& clip, int target_rate_hz) {
  clip.validate();
  LIPGER_REQUIRE(target_rate_hz > 0, "resample_nearest: target rate must be positive");
  if (clip.sample_rate_hz == target_rate_hz) return clip;
  const double ratio = static_cast<double>(clip.sample_rate_hz) / target_rate_hz;
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) / ratio)));
  AudioClip out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = std::min(clip.size() - 1, static_cast<std::size_t>(std::floor((i + 0.5) * ratio)));
    out.samples[i] = clip.samples[src];
  }
  return out;
}

AudioClip read_wav(const std::string& path, const WavReadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_wav: cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(b, "RIFF", 4) != 0 || std::memcmp(b + 8, "WAVE", 4) != 0)
    throw DataError("read_wav: " + path + " is not a RIFF/WAVE file");
  int channels = 0, bits = 0, rate = 0, format = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = rd_u32(b + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw DataError("read_wav: truncated chunk in " + path);
    if (std::memcmp(b + pos, "fmt ", 4) == 0 && len >= 16) {
      format = rd_u16(b + body);
      channels = rd_u16(b + body + 2);
      rate = static_cast<int>(rd_u32(b + body + 4));
      bits = rd_u16(b + body + 14);
    } else if (std::memcmp(b + pos, "data", 4) == 0) {
      pcm = b + body;
      pcm_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (format != 1 || bits != 16) throw DataError("read_wav: " + path + " is not 16-bit PCM");
  if (channels != 1) throw DataError("read_wav: " + path + " has " + std::to_string(channels) + " channels, expected mono");
  if (pcm == nullptr || pcm_len < 2) throw DataError("read_wav: " + path + " has no audio data");
  AudioClip clip;
  clip.sample_rate_hz = rate;
  clip.samples.resize(pcm_len / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] = static_cast<std::int16_t>(rd_u16(pcm + 2 * i)) / 32768.0;
  if (rate != opts.expected_rate_hz) {
    if (!opts.allow_resample)
      throw DataError("read_wav: " + path + " is " + std::to_string(rate) + " Hz, expected " +
                      std::to_string(opts.expected_rate_hz) + " Hz (resampling disabled)");
    clip = resample_nearest(clip, opts.expected_rate_hz);
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  clip.validate("write_wav");
  const auto data_len = static_cast<std::uint32_t>(clip.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  wr_u32(out, 36 + data_len);
  out.append("WAVEfmt ");
  wr_u32(out, 16);
  wr_u16(out, 1);
  wr_u16(out, 1);
  wr_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  wr_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  wr_u16(out, 2);
  wr_u16(out, 16);
  out.append("data");
  wr_u32(out, data_len);
  for (double x : clip.samples) {
    const double c = std::clamp(x, -1.0, 32767.0 / 32768.0);
    wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("write_wav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write_wav: write failed for " + path);
}

}  // namespace lipger
