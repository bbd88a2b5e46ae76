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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lipger/audio.hpp"
#include "lipger/common.hpp"

namespace lipger {
namespace {

AudioClip random_clip(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  Rng r(seed);
  AudioClip c;
  c.samples.resize(n);
  for (auto& s : c.samples) s = amp * r.normal();
  return c;
}

// Direct-form linear convolution truncated to the input length.
std::vector<double> naive_conv(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n)
    for (std::size_t k = 0; k < h.size() && k <= n; ++k) y[n] += h[k] * x[n - k];
  return y;
}

double snr_db(const std::vector<double>& clean, const std::vector<double>& noise_part) {
  double ps = 0, pn = 0;
  for (double v : clean) ps += v * v;
  for (double v : noise_part) pn += v * v;
  return 10.0 * std::log10(ps / pn);
}

TEST(Audio, PowerOfConstantSignal) {
  const std::vector<double> x(100, 0.5);
  EXPECT_DOUBLE_EQ(measure_power(x), 0.25);
}

TEST(Audio, MixHitsTargetSnr) {
  Rng r(11);
  for (int t = 0; t < 50; ++t) {
    const AudioClip s = random_clip(4000, 100 + t);
    const AudioClip n = random_clip(1500 + t * 13, 500 + t, 0.1);
    const double target = r.uniform(0.0, 40.0);
    const std::size_t off = r.index(n.size());
    const MixResult m = mix_at_snr(s, n, target, off);
    std::vector<double> resid(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) resid[i] = m.mixed.samples[i] - s.samples[i];
    EXPECT_NEAR(snr_db(s.samples, resid), target, 1e-6);
  }
}

TEST(Audio, NoiseLoopsFromOffset) {
  const std::vector<double> n{1, 2, 3};
  EXPECT_EQ(fit_noise(n, 7, 2), (std::vector<double>{3, 1, 2, 3, 1, 2, 3}));
  EXPECT_EQ(fit_noise(n, 2, 0), (std::vector<double>{1, 2}));
}

TEST(Audio, SilentInputsAreRejected) {
  AudioClip s = random_clip(100, 1);
  AudioClip z;
  z.samples.assign(50, 0.0);
  EXPECT_THROW(mix_at_snr(s, z, 10.0), PreconditionError);
  EXPECT_THROW(mix_at_snr(z, s, 10.0), PreconditionError);
}

TEST(Audio, UnitDeltaIrIsIdentity) {
  const AudioClip c = random_clip(3000, 4, 0.2);
  ImpulseResponse ir;
  ir.samples = {1.0};
  const AudioClip y = convolve_ir(c, ir);
  ASSERT_EQ(y.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(y.samples[i], c.samples[i]);
}

TEST(Audio, DelayedDeltaShifts) {
  const AudioClip c = random_clip(200, 5);
  ImpulseResponse ir;
  ir.samples = {0.0, 0.0, 0.0, 1.0};
  const AudioClip y = convolve_ir(c, ir);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.samples[i], 0.0);
  for (std::size_t i = 3; i < c.size(); ++i) EXPECT_EQ(y.samples[i], c.samples[i - 3]);
}

TEST(Audio, FftPathMatchesDirectSum) {
  // Large enough to leave the direct-sum branch.
  const AudioClip c = random_clip(20000, 6, 0.05);
  const ImpulseResponse ir = synthetic_ir(0.2, 16000, 9, 0.3);
  ASSERT_GT(ir.samples.size() * c.size(), std::size_t{1} << 20);
  const AudioClip y = convolve_ir(c, ir);
  const auto ref = naive_conv(c.samples, ir.samples);
  double peak = 0;
  for (double v : ref) peak = std::max(peak, std::abs(v));
  const double k = peak > 1.0 ? 0.999 / peak : 1.0;
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y.samples[i], k * ref[i], 1e-9);
}

TEST(Audio, RateMismatchNamesBothRates) {
  const AudioClip c = random_clip(100, 7);
  ImpulseResponse ir;
  ir.samples = {1.0};
  ir.sample_rate_hz = 8000;
  try {
    convolve_ir(c, ir);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("16000"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("8000"), std::string::npos);
  }
}

TEST(Audio, PeakRescaleOnlyWhenClipping) {
  AudioClip c;
  c.samples = {0.9, 0.9, 0.5};
  ImpulseResponse ir;
  ir.samples = {1.0, 1.0};
  const AudioClip y = convolve_ir(c, ir);  // raw {0.9, 1.8, 1.4}
  EXPECT_NEAR(y.samples[1], 0.999, 1e-12);
  EXPECT_NEAR(y.samples[0], 0.9 * 0.999 / 1.8, 1e-12);
  AudioClip quiet;
  quiet.samples = {0.1, 0.2};
  EXPECT_EQ(convolve_ir(quiet, ir).samples[1], 0.1 + 0.2);
}

NoisePools small_pools() {
  NoisePools p;
  p.noises["n"] = random_clip(5000, 20, 0.2);
  p.interferers["i"] = random_clip(3000, 21, 0.2);
  p.irs["r"] = synthetic_ir(0.05, 16000, 22, 0.3);
  return p;
}

TEST(Simulate, SnrIsRelativeToCleanSpeech) {
  const AudioClip clean = random_clip(8000, 30, 0.2);
  const NoisePools pools = small_pools();
  CorruptionSpec spec;
  spec.snr_db_background = 12.5;
  spec.noise_id = "n";
  spec.seed = 3;
  const SimulationResult r = simulate_noisy(clean, spec, pools);
  ASSERT_TRUE(r.provenance.measured_snr_db_background.has_value());
  EXPECT_NEAR(*r.provenance.measured_snr_db_background, 12.5, 0.01);
  std::vector<double> resid(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) resid[i] = r.noisy.samples[i] / r.provenance.peak_rescale - clean.samples[i];
  EXPECT_NEAR(snr_db(clean.samples, resid), 12.5, 0.01);
}

TEST(Simulate, DeterministicAndPure) {
  const AudioClip clean = random_clip(6000, 31);
  const NoisePools pools = small_pools();
  const CorruptionSpec spec = sample_corruption_spec(77, pools, CorruptionRanges{});
  const auto a = simulate_noisy(clean, spec, pools);
  const auto b = simulate_noisy(clean, spec, pools);
  EXPECT_EQ(a.noisy.samples, b.noisy.samples);
  EXPECT_EQ(a.provenance, b.provenance);
}

TEST(Simulate, MissingPoolIdIsNamed) {
  const AudioClip clean = random_clip(1000, 32);
  CorruptionSpec spec;
  spec.noise_id = "no-such-noise";
  try {
    simulate_noisy(clean, spec, small_pools());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no-such-noise"), std::string::npos);
  }
}

TEST(Simulate, SnrOutsideRangeRejected) {
  CorruptionSpec spec;
  spec.snr_db_background = 41.0;
  EXPECT_THROW(spec.validate(), PreconditionError);
  spec.snr_db_background = -0.5;
  EXPECT_THROW(spec.validate(), PreconditionError);
}

TEST(Simulate, SampledSpecsStayInRange) {
  const NoisePools pools = small_pools();
  CorruptionRanges r;
  r.snr_background_min = 5;
  r.snr_background_max = 15;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CorruptionSpec c = sample_corruption_spec(s, pools, r);
    EXPECT_GE(c.snr_db_background, 5.0);
    EXPECT_LE(c.snr_db_background, 15.0);
  }
  EXPECT_EQ(sample_corruption_spec(4, pools, r), sample_corruption_spec(4, pools, r));
}

TEST(Wav, RoundTripWithinQuantisation) {
  const auto dir = std::filesystem::temp_directory_path() / "lipger_wav_test";
  std::filesystem::create_directories(dir);
  const AudioClip c = random_clip(1234, 40, 0.2);
  const std::string p = (dir / "a.wav").string();
  write_wav(p, c);
  const AudioClip back = read_wav(p);
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(back.sample_rate_hz, 16000);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(back.samples[i], c.samples[i], 1.0 / 32768.0 + 1e-12);
}

TEST(Wav, WrongRateIsRejectedUnlessResampling) {
  const auto dir = std::filesystem::temp_directory_path() / "lipger_wav_test";
  std::filesystem::create_directories(dir);
  AudioClip c = random_clip(800, 41, 0.2);
  c.sample_rate_hz = 8000;
  const std::string p = (dir / "b.wav").string();
  write_wav(p, c);
  EXPECT_THROW(read_wav(p), DataError);
  WavReadOptions o;
  o.allow_resample = true;
  const AudioClip r = read_wav(p, o);
  EXPECT_EQ(r.sample_rate_hz, 16000);
  EXPECT_EQ(r.size(), 1600u);
}

}  // namespace
}  // namespace lipger
