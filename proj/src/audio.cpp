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

#include "lipger/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "lipger/common.hpp"

namespace lipger {

namespace {

constexpr double kPeakTarget = 0.999;

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

double peak(std::span<const double> xs) {
  double p = 0.0;
  for (double x : xs) p = std::max(p, std::abs(x));
  return p;
}

std::vector<double> convolve_direct(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    const std::size_t kmax = std::min(n + 1, h.size());
    for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

std::vector<double> convolve_fft(std::span<const double> x, std::span<const double> h) {
  std::size_t nfft = 1;
  while (nfft < x.size() + h.size() - 1) nfft <<= 1;
  const std::size_t nbins = nfft / 2 + 1;
  std::vector<double> a(nfft, 0.0), b(nfft, 0.0);
  std::copy(x.begin(), x.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<std::complex<double>> fa(nbins), fb(nbins);
  auto* ca = reinterpret_cast<fftw_complex*>(fa.data());
  auto* cb = reinterpret_cast<fftw_complex*>(fb.data());
  const int n = static_cast<int>(nfft);
  fftw_plan pa = fftw_plan_dft_r2c_1d(n, a.data(), ca, FFTW_ESTIMATE);
  fftw_plan pb = fftw_plan_dft_r2c_1d(n, b.data(), cb, FFTW_ESTIMATE);
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t i = 0; i < nbins; ++i) fa[i] *= fb[i];
  fftw_plan pi = fftw_plan_dft_c2r_1d(n, ca, a.data(), FFTW_ESTIMATE);
  fftw_execute(pi);
  fftw_destroy_plan(pa);
  fftw_destroy_plan(pb);
  fftw_destroy_plan(pi);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] / static_cast<double>(nfft);
  return y;
}

}  // namespace

void AudioClip::validate(const char* what) const {
  if (samples.empty()) throw PreconditionError(std::string(what) + ": empty clip");
  if (sample_rate_hz <= 0) throw PreconditionError(std::string(what) + ": sample rate must be positive");
  if (!all_finite(samples)) throw PreconditionError(std::string(what) + ": non-finite sample");
}

void ImpulseResponse::validate() const {
  if (samples.empty()) throw PreconditionError("ImpulseResponse: empty");
  if (sample_rate_hz <= 0) throw PreconditionError("ImpulseResponse: sample rate must be positive");
  if (!all_finite(samples)) throw PreconditionError("ImpulseResponse: non-finite sample");
}

void CorruptionSpec::validate() const {
  if (!(snr_db_background >= 0.0 && snr_db_background <= 40.0))
    throw PreconditionError("CorruptionSpec: snr_db_background " + std::to_string(snr_db_background) +
                            " outside [0, 40]");
  if (!std::isfinite(snr_db_interferer)) throw PreconditionError("CorruptionSpec: non-finite interferer SNR");
}

double measure_power(std::span<const double> samples) {
  LIPGER_REQUIRE(!samples.empty(), "measure_power: empty clip");
  double s = 0.0;
  for (double x : samples) s += x * x;
  return s / static_cast<double>(samples.size());
}

AudioClip convolve_ir(const AudioClip& clip, const ImpulseResponse& ir) {
  clip.validate();
  ir.validate();
  if (clip.sample_rate_hz != ir.sample_rate_hz)
    throw PreconditionError("convolve_ir: clip sample rate " + std::to_string(clip.sample_rate_hz) +
                            " Hz differs from impulse response rate " + std::to_string(ir.sample_rate_hz) + " Hz");
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  // The direct sum is exact for short kernels (a unit delta is an identity).
  const bool direct = ir.samples.size() <= 64 || clip.size() * ir.samples.size() <= (1u << 20);
  out.samples = direct ? convolve_direct(clip.samples, ir.samples) : convolve_fft(clip.samples, ir.samples);
  const double p = peak(out.samples);
  if (p > 1.0)
    for (double& x : out.samples) x *= kPeakTarget / p;
  return out;
}

double snr_scale(double ref_power, double noise_power, double snr_db) {
  if (!(ref_power > 0.0)) throw PreconditionError("mix_at_snr: silent signal (zero power)");
  if (!(noise_power > 0.0)) throw PreconditionError("mix_at_snr: silent noise (zero power)");
  LIPGER_REQUIRE(std::isfinite(snr_db), "mix_at_snr: non-finite SNR");
  return std::sqrt(ref_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

std::vector<double> fit_noise(std::span<const double> noise, std::size_t length, std::size_t offset) {
  LIPGER_REQUIRE(!noise.empty(), "fit_noise: empty noise");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = noise[(offset + i) % noise.size()];
  return out;
}

MixResult mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db, std::size_t noise_offset) {
  signal.validate("mix_at_snr signal");
  noise.validate("mix_at_snr noise");
  const std::vector<double> fitted = fit_noise(noise.samples, signal.size(), noise_offset);
  MixResult r;
  r.scale = snr_scale(measure_power(signal), measure_power(fitted), snr_db);
  r.mixed.sample_rate_hz = signal.sample_rate_hz;
  r.mixed.samples.resize(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) r.mixed.samples[i] = signal.samples[i] + r.scale * fitted[i];
  return r;
}

SimulationResult simulate_noisy(const AudioClip& clip, const CorruptionSpec& spec, const NoisePools& pools) {
  clip.validate();
  spec.validate();
  SimulationResult res;
  res.provenance.spec = spec;
  Rng rng(derive_seed(spec.seed, "simulate_noisy"));
  const double clean_power = measure_power(clip);

  std::vector<double> mix = clip.samples;
  if (spec.ir_id) {
    const auto it = pools.irs.find(*spec.ir_id);
    if (it == pools.irs.end()) throw DataError("simulate_noisy: impulse response '" + *spec.ir_id + "' not in pool");
    mix = convolve_ir(clip, it->second).samples;
  }

  auto add_source = [&](const AudioClip& src, double snr_db, std::size_t& offset, double& scale) {
    src.validate("noise source");
    if (src.sample_rate_hz != clip.sample_rate_hz)
      throw PreconditionError("simulate_noisy: noise rate " + std::to_string(src.sample_rate_hz) +
                              " Hz differs from clip rate " + std::to_string(clip.sample_rate_hz) + " Hz");
    offset = rng.index(src.size());
    const std::vector<double> fitted = fit_noise(src.samples, clip.size(), offset);
    scale = snr_scale(clean_power, measure_power(fitted), snr_db);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] += scale * fitted[i];
    return fitted;
  };

  if (spec.interferer_id) {
    const auto it = pools.interferers.find(*spec.interferer_id);
    if (it == pools.interferers.end())
      throw DataError("simulate_noisy: interferer '" + *spec.interferer_id + "' not in pool");
    add_source(it->second, spec.snr_db_interferer, res.provenance.interferer_offset, res.provenance.interferer_scale);
  }
  if (spec.noise_id) {
    const auto it = pools.noises.find(*spec.noise_id);
    if (it == pools.noises.end()) throw DataError("simulate_noisy: noise '" + *spec.noise_id + "' not in pool");
    const std::vector<double> fitted =
        add_source(it->second, spec.snr_db_background, res.provenance.noise_offset, res.provenance.noise_scale);
    const double scaled_power = res.provenance.noise_scale * res.provenance.noise_scale * measure_power(fitted);
    res.provenance.measured_snr_db_background = 10.0 * std::log10(clean_power / scaled_power);
  }

  const double p = peak(mix);
  if (p > 1.0) {
    res.provenance.peak_rescale = kPeakTarget / p;
    for (double& x : mix) x *= res.provenance.peak_rescale;
  }
  res.noisy.samples = std::move(mix);
  res.noisy.sample_rate_hz = clip.sample_rate_hz;
  return res;
}

CorruptionSpec sample_corruption_spec(std::uint64_t seed, const NoisePools& pools, const CorruptionRanges& ranges) {
  LIPGER_REQUIRE(ranges.snr_background_min >= 0.0 && ranges.snr_background_max <= 40.0 &&
                     ranges.snr_background_min <= ranges.snr_background_max,
                 "sample_corruption_spec: background SNR range must lie within [0, 40]");
  Rng rng(derive_seed(seed, "corruption_spec"));
  auto pick = [&rng](const auto& pool, double p) -> std::optional<std::string> {
    const double u = rng.uniform();
    const std::size_t i = pool.empty() ? 0 : rng.index(pool.size());
    if (pool.empty() || u >= p) return std::nullopt;
    return std::next(pool.begin(), static_cast<std::ptrdiff_t>(i))->first;
  };
  CorruptionSpec s;
  s.seed = seed;
  s.ir_id = pick(pools.irs, ranges.p_reverb);
  s.interferer_id = pick(pools.interferers, ranges.p_interferer);
  s.noise_id = pick(pools.noises, ranges.p_noise);
  s.snr_db_background = rng.uniform(ranges.snr_background_min, ranges.snr_background_max);
  s.snr_db_interferer = rng.uniform(ranges.snr_interferer_min, ranges.snr_interferer_max);
  return s;
}

ImpulseResponse synthetic_ir(double rt60_seconds, int sample_rate_hz, std::uint64_t seed, double tail_gain) {
  LIPGER_REQUIRE(rt60_seconds > 0.0 && sample_rate_hz > 0, "synthetic_ir: RT60 and rate must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(rt60_seconds * sample_rate_hz));
  ImpulseResponse ir;
  ir.sample_rate_hz = sample_rate_hz;
  ir.samples.resize(std::max<std::size_t>(n, 1));
  Rng rng(seed);
  // 60 dB amplitude decay over rt60: exp(-ln(1000) * t / rt60).
  const double k = std::log(1000.0) / (rt60_seconds * sample_rate_hz);
  for (std::size_t i = 1; i < ir.samples.size(); ++i)
    ir.samples[i] = tail_gain * rng.normal() * std::exp(-k * static_cast<double>(i));
  ir.samples[0] = 1.0;
  return ir;
}

}  // namespace lipger
