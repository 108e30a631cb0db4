// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "buzzline/rng.hpp"
#include "buzzline/stft.hpp"
#include "oracles.hpp"

using namespace buzzline;

namespace {

AudioClip noise_clip(int rate, std::size_t n, std::uint64_t seed) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  Rng rng(seed);
  for (double& s : c.samples) s = rng.uniform(-1.0, 1.0);
  return c;
}

Spectrogram run_batched(const AudioClip& clip, const StftConfig& cfg) {
  const StftKernels k = StftKernels::fourier_init(cfg);
  return stft_forward(clip, k, cfg);
}

}  // namespace

TEST_CASE("batched stft equals the direct-trig reference", "[stft]") {
  for (std::size_t frame : {8UL, 64UL, 256UL}) {
    StftConfig cfg;
    cfg.frame_length = frame;
    cfg.hop_length = std::max<std::size_t>(1, frame / 4);
    cfg.sample_rate = 8000;
    const AudioClip clip = noise_clip(8000, 4 * frame + 13, 1000 + frame);
    const Spectrogram got = run_batched(clip, cfg);
    const Matrix want = oracle::dft_power(clip.samples, frame, cfg.hop_length,
                                          make_window(WindowKind::kHann, frame));
    REQUIRE(got.values.rows == frame / 2 + 1);
    REQUIRE(relative_frobenius_diff(got.values, want) < 1e-6);
  }
}

TEST_CASE("per-frame naive strategy equals the batched one", "[stft]") {
  StftConfig cfg;
  cfg.frame_length = 128;
  cfg.hop_length = 32;
  cfg.sample_rate = 8000;
  const StftKernels k = StftKernels::fourier_init(cfg);
  const AudioClip clip = noise_clip(8000, 1000, 5);
  const Spectrogram a = stft_forward(clip, k, cfg);
  const Spectrogram b = stft_per_frame_naive(clip, k, cfg);
  REQUIRE(relative_frobenius_diff(a.values, b.values) < 1e-12);
}

TEST_CASE("frame count follows 1 + floor((n - frame) / hop)", "[stft]") {
  StftConfig cfg;
  cfg.frame_length = 64;
  cfg.hop_length = 16;
  cfg.sample_rate = 8000;
  REQUIRE(cfg.n_frames(64) == 1);
  REQUIRE(cfg.n_frames(79) == 1);
  REQUIRE(cfg.n_frames(80) == 2);
  REQUIRE_THROWS_AS(cfg.n_frames(63), DataError);  // shorter than one frame
  const AudioClip clip = noise_clip(8000, 300, 9);
  REQUIRE(run_batched(clip, cfg).values.cols == cfg.n_frames(300));
}

TEST_CASE("a pure bin-centered tone concentrates in its bin", "[stft]") {
  StftConfig cfg;
  cfg.frame_length = 256;
  cfg.hop_length = 64;
  cfg.sample_rate = 8000;
  const double bin_hz = 8000.0 / 256.0;
  const std::size_t target = 13;
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.resize(2048);
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] =
        std::sin(2.0 * std::numbers::pi * (target * bin_hz) * static_cast<double>(i) / 8000.0);
  const Spectrogram spec = run_batched(clip, cfg);
  for (std::size_t t = 0; t < spec.values.cols; ++t) {
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < spec.values.rows; ++k)
      if (spec.values(k, t) > spec.values(argmax, t)) argmax = k;
    REQUIRE(argmax == target);
  }
  REQUIRE(spec.bin_hz == Catch::Approx(bin_hz).margin(1e-12));
  REQUIRE(spec.frame_hop_s == Catch::Approx(64.0 / 8000.0).margin(1e-15));
}

TEST_CASE("windowed energy conservation holds for rectangular kernels", "[stft]") {
  // Parseval for the real DFT over one frame: sum_n x^2 = (1/N) * sum over the
  // full spectrum; with onesided bins, interior bins count twice.
  StftConfig cfg;
  cfg.frame_length = 64;
  cfg.hop_length = 64;
  cfg.window = WindowKind::kRectangular;
  cfg.sample_rate = 8000;
  const AudioClip clip = noise_clip(8000, 64, 77);
  const Spectrogram spec = run_batched(clip, cfg);
  double spectral = 0.0;
  for (std::size_t k = 0; k < spec.values.rows; ++k) {
    const bool edge = k == 0 || k == spec.values.rows - 1;
    spectral += (edge ? 1.0 : 2.0) * spec.values(k, 0);
  }
  double time = 0.0;
  for (double s : clip.samples) time += s * s;
  REQUIRE(spectral / 64.0 == Catch::Approx(time).epsilon(1e-9));
}

TEST_CASE("stft rejects sample-rate mismatches and bad configs", "[stft]") {
  StftConfig cfg;
  cfg.sample_rate = 8000;
  const StftKernels k = StftKernels::fourier_init(cfg);
  AudioClip wrong = noise_clip(16000, 4096, 3);
  REQUIRE_THROWS_AS(stft_forward(wrong, k, cfg), ConfigError);

  StftConfig zero_hop;
  zero_hop.hop_length = 0;
  REQUIRE_THROWS_AS(zero_hop.validate(), ConfigError);
}

TEST_CASE("kernel gradients match finite differences", "[stft]") {
  StftConfig cfg;
  cfg.frame_length = 16;
  cfg.hop_length = 8;
  cfg.sample_rate = 8000;
  StftKernels k = StftKernels::fourier_init(cfg);
  const AudioClip clip = noise_clip(8000, 48, 12);

  // loss = weighted sum of the power spectrogram
  Matrix wts(cfg.n_bins(), cfg.n_frames(clip.samples.size()));
  Rng rng(4);
  for (double& v : wts.data) v = rng.normal();
  auto loss = [&]() {
    const Spectrogram s = stft_forward(clip, k, cfg);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) acc += wts.data[i] * s.values.data[i];
    return acc;
  };

  StftSaved saved;
  StftKernelCache cache;
  cache.refresh(k, 0);
  stft_forward(clip, k, cfg, cache, &saved);
  const StftGrads grads = stft_backward(wts, saved);

  for (int trial = 0; trial < 24; ++trial) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.n_bins()) - 1));
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.frame_length) - 1));
    const bool real_side = trial % 2 == 0;
    double* p = real_side ? &k.real(r, c) : &k.imag(r, c);
    const double analytic = real_side ? grads.d_real(r, c) : grads.d_imag(r, c);
    const double numeric = oracle::fd(p, loss, 1e-5);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    REQUIRE(std::abs(analytic - numeric) / denom < 1e-5);
  }
}

TEST_CASE("kernel cache refresh tracks parameter edits", "[stft]") {
  StftConfig cfg;
  cfg.frame_length = 32;
  cfg.hop_length = 16;
  cfg.sample_rate = 8000;
  StftKernels k = StftKernels::fourier_init(cfg);
  StftKernelCache cache;
  cache.refresh(k, 1);
  const AudioClip clip = noise_clip(8000, 96, 21);
  const Spectrogram before = stft_forward(clip, k, cfg, cache, nullptr);

  k.real(3, 5) += 0.25;  // stale cache would keep the old kernels
  cache.refresh(k, 2);
  const Spectrogram after = stft_forward(clip, k, cfg, cache, nullptr);
  REQUIRE(relative_frobenius_diff(before.values, after.values) > 0.0);

  const Spectrogram direct = stft_forward(clip, k, cfg);
  REQUIRE(relative_frobenius_diff(after.values, direct.values) < 1e-15);
}
