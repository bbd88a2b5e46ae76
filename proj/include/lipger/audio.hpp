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

#ifndef LIPGER_AUDIO_HPP_
#define LIPGER_AUDIO_HPP_

// Noisy-speech simulation: reverberation by impulse-response convolution,
// interfering speech and background noise mixed at a requested SNR.
// Every SNR here is measured against the clean (pre-reverb) speech power.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lipger {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  // Throws PreconditionError unless non-empty, finite and rate > 0.
  void validate(const char* what = "AudioClip") const;
  std::size_t size() const { return samples.size(); }
};

struct ImpulseResponse {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  void validate() const;
};

double measure_power(std::span<const double> samples);
inline double measure_power(const AudioClip& clip) { return measure_power(clip.samples); }

// Linear convolution truncated to the input length. Output is rescaled to
// peak 0.999 only when its peak exceeds 1.0.
AudioClip convolve_ir(const AudioClip& clip, const ImpulseResponse& ir);

// Noise scale giving 10*log10(ref_power / (scale^2 * noise_power)) == snr_db.
double snr_scale(double ref_power, double noise_power, double snr_db);

// Loops (or truncates) noise to `length` samples starting at `offset`.
std::vector<double> fit_noise(std::span<const double> noise, std::size_t length, std::size_t offset);

struct MixResult {
  AudioClip mixed;
  double scale = 1.0;
};

// mixed = signal + scale * noise, noise looped/truncated to the signal
// length starting at `noise_offset`.
MixResult mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db,
                     std::size_t noise_offset = 0);

struct CorruptionSpec {
  double snr_db_background = 20.0;  // within [0, 40]
  double snr_db_interferer = 20.0;
  std::optional<std::string> ir_id;
  std::optional<std::string> interferer_id;
  std::optional<std::string> noise_id;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const CorruptionSpec&) const = default;
};

struct NoisePools {
  std::map<std::string, ImpulseResponse> irs;
  std::map<std::string, AudioClip> interferers;
  std::map<std::string, AudioClip> noises;
};

// What simulate_noisy actually did to one utterance.
struct CorruptionProvenance {
  CorruptionSpec spec;
  std::size_t interferer_offset = 0;
  std::size_t noise_offset = 0;
  double interferer_scale = 0.0;
  double noise_scale = 0.0;
  double peak_rescale = 1.0;  // uniform factor applied to avoid clipping
  std::optional<double> measured_snr_db_background;

  bool operator==(const CorruptionProvenance&) const = default;
};

struct SimulationResult {
  AudioClip noisy;
  CorruptionProvenance provenance;
};

// IR convolution -> interferer mix -> background-noise mix. Pure function of
// its arguments.
SimulationResult simulate_noisy(const AudioClip& clip, const CorruptionSpec& spec, const NoisePools& pools);

struct CorruptionRanges {
  double snr_background_min = 0.0;
  double snr_background_max = 40.0;
  double snr_interferer_min = 0.0;
  double snr_interferer_max = 40.0;
  double p_reverb = 1.0;
  double p_interferer = 1.0;
  double p_noise = 1.0;
};

// Draws pool ids and SNRs from `seed`. Empty pools yield absent ids.
CorruptionSpec sample_corruption_spec(std::uint64_t seed, const NoisePools& pools, const CorruptionRanges& ranges);

// Exponentially decaying white noise behind a unit direct path.
ImpulseResponse synthetic_ir(double rt60_seconds, int sample_rate_hz, std::uint64_t seed, double tail_gain = 0.5);

// ---- WAV I/O (mono, 16-bit PCM) -------------------------------------------

struct WavReadOptions {
  int expected_rate_hz = 16000;
  bool allow_resample = false;  // nearest-neighbour to expected_rate_hz
};

AudioClip read_wav(const std::string& path, const WavReadOptions& opts = {});
void write_wav(const std::string& path, const AudioClip& clip);
AudioClip resample_nearest(const AudioClip& clip, int target_rate_hz);

}  // namespace lipger

#endif  // LIPGER_AUDIO_HPP_
