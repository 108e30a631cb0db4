// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "buzzline/audio.hpp"
#include "buzzline/common.hpp"
#include "buzzline/manifest.hpp"
#include "buzzline/rng.hpp"
#include "buzzline/wav.hpp"

namespace buzzline {

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

enum class PadMode { kSilence, kNoiseFill };

struct SegmentSpec {
  double duration_s = 1.92;
  PadMode pad_mode = PadMode::kSilence;

  std::size_t samples_at(int sample_rate) const {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  }
};

// Tile a clip into consecutive non-overlapping fixed-length windows; the final
// partial window is zero-padded. No input sample is discarded. In noise_fill
// mode the pad is still zeros here; augment.mix fills it downstream.
inline std::vector<AudioClip> segment(const AudioClip& clip, const SegmentSpec& spec) {
  clip.check_invariants();
  if (spec.duration_s <= 0.0) throw ConfigError("segment: duration must be positive");
  const std::size_t win = spec.samples_at(clip.sample_rate);
  if (win == 0) throw ConfigError("segment: duration rounds to zero samples");

  std::vector<AudioClip> out;
  const std::size_t n = clip.samples.size();
  for (std::size_t start = 0; start < n; start += win) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    seg.samples.assign(win, 0.0);
    const std::size_t count = std::min(win, n - start);
    std::copy(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
              clip.samples.begin() + static_cast<std::ptrdiff_t>(start + count),
              seg.samples.begin());
    out.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SynthConfig {
  int sample_rate = 8000;
  double clip_duration_s = 1.92;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t n_noise = 8;  // extra pink-noise WAVs for the augmentation noise dir
  double snr_db_lo = -5.0;
  double snr_db_hi = 20.0;
  double chirp_prob = 0.3;      // non-harmonic distractor on negatives
  double gain_lo = 1.0;         // per-clip loudness, train split
  double gain_hi = 1.0;
  double test_gain_lo = 1.0;    // per-clip loudness, test split
  double test_gain_hi = 1.0;
  double test_fraction = 0.2;

  void validate() const {
    if (sample_rate <= 0) throw ConfigError("corpus: sample_rate must be positive");
    if (clip_duration_s <= 0) throw ConfigError("corpus: clip_duration_s must be positive");
    if (snr_db_lo > snr_db_hi) throw ConfigError("corpus: snr_db range inverted");
    if (gain_lo > gain_hi || test_gain_lo > test_gain_hi)
      throw ConfigError("corpus: gain range inverted");
    if (gain_lo <= 0 || test_gain_lo <= 0) throw ConfigError("corpus: gains must be positive");
    if (chirp_prob < 0 || chirp_prob > 1) throw ConfigError("corpus: chirp_prob outside [0,1]");
    if (test_fraction < 0 || test_fraction > 1)
      throw ConfigError("corpus: test_fraction outside [0,1]");
  }
};

struct SynthClipMeta {
  std::string name;
  bool positive = false;
  double fundamental_hz = 0.0;  // 0 for negatives
  double snr_db = 0.0;
  double gain = 1.0;
  std::string split;
};

struct SynthResult {
  std::vector<AudioClip> clips;  // parallel to manifest.entries
  Manifest manifest;
  std::vector<SynthClipMeta> meta;
  std::vector<AudioClip> noise_clips;  // pink noise for the mix augmentation
};

namespace synth_detail {

// Paul Kellet's pink noise filter over uniform white noise, normalized to a
// target RMS.
inline std::vector<double> pink_noise(std::size_t n, double rms, Rng& rng) {
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double white = rng.uniform(-1.0, 1.0);
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
  }
  double p = 0.0;
  for (double v : out) p += v * v;
  p = std::sqrt(p / static_cast<double>(n));
  const double scale = p > 0 ? rms / p : 0.0;
  for (double& v : out) v *= scale;
  return out;
}

inline double mean_square(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi <= lo) return 0.0;
  double acc = 0.0;
  for (std::size_t i = lo; i < hi; ++i) acc += v[i] * v[i];
  return acc / static_cast<double>(hi - lo);
}

// Raised-cosine fade of `fade` samples at both ends of [lo, hi).
inline double edge_fade(std::size_t i, std::size_t lo, std::size_t hi, std::size_t fade) {
  const std::size_t from_start = i - lo;
  const std::size_t from_end = hi - 1 - i;
  double g = 1.0;
  if (fade > 0 && from_start < fade)
    g *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(from_start) / fade);
  if (fade > 0 && from_end < fade)
    g *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(from_end) / fade);
  return g;
}

inline bool in_test_split(std::size_t index, double test_fraction) {
  const double a = std::floor(static_cast<double>(index) * test_fraction);
  const double b = std::floor(static_cast<double>(index + 1) * test_fraction);
  return b > a;
}

constexpr double kNoiseRms = 0.03;

}  // namespace synth_detail

// Pure function of (config, seed). Each clip draws from its own substream
// keyed by name, so corpora are stable under count changes and parallel
// generation.
inline SynthResult synth_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  using namespace synth_detail;
  cfg.validate();

  SynthResult res;
  const std::size_t n_samples =
      static_cast<std::size_t>(std::llround(cfg.clip_duration_s * cfg.sample_rate));
  const std::size_t fade = static_cast<std::size_t>(cfg.sample_rate / 100);  // 10 ms

  auto make_name = [](const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04zu.wav", prefix, i);
    return std::string(buf);
  };

  auto finish_clip = [&](std::vector<double>&& samples, SynthClipMeta&& meta,
                         std::vector<LabeledEvent>&& events) {
    AudioClip clip;
    clip.sample_rate = cfg.sample_rate;
    clip.samples = std::move(samples);
    for (double& s : clip.samples) s *= meta.gain;
    const double pk = clip.peak();
    if (pk > 0.99) {
      for (double& s : clip.samples) s *= 0.99 / pk;
    }
    res.manifest.entries.push_back(ManifestEntry{meta.name, std::move(events), meta.split});
    res.clips.push_back(std::move(clip));
    res.meta.push_back(std::move(meta));
  };

  for (std::size_t i = 0; i < cfg.n_positive; ++i) {
    SynthClipMeta meta;
    meta.name = make_name("pos", i);
    meta.positive = true;
    meta.split = in_test_split(i, cfg.test_fraction) ? "test" : "train";
    Rng rng = Rng::derive(seed, meta.name);

    meta.fundamental_hz = rng.uniform(350.0, 650.0);
    const double am_rate = rng.uniform(5.0, 10.0);
    const double am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double phases[3];
    for (double& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double onset_s = rng.uniform(0.0, 0.2) * cfg.clip_duration_s;
    const double offset_s = cfg.clip_duration_s - rng.uniform(0.0, 0.2) * cfg.clip_duration_s;
    meta.snr_db = rng.uniform(cfg.snr_db_lo, cfg.snr_db_hi);
    const bool test = meta.split == "test";
    meta.gain = std::exp(rng.uniform(std::log(test ? cfg.test_gain_lo : cfg.gain_lo),
                                     std::log(test ? cfg.test_gain_hi : cfg.gain_hi)));

    std::vector<double> samples = pink_noise(n_samples, kNoiseRms, rng);
    const double noise_power = mean_square(samples, 0, n_samples);

    const auto lo = static_cast<std::size_t>(std::llround(onset_s * cfg.sample_rate));
    const auto hi = static_cast<std::size_t>(std::llround(offset_s * cfg.sample_rate));
    static constexpr double kHarmonicAmp[3] = {1.0, 0.5, 0.25};
    std::vector<double> buzz(n_samples, 0.0);
    for (std::size_t t = lo; t < hi; ++t) {
      const double sec = static_cast<double>(t) / cfg.sample_rate;
      double carrier = 0.0;
      for (int h = 0; h < 3; ++h) {
        const double f = meta.fundamental_hz * (h + 1);
        if (f >= cfg.sample_rate / 2.0) break;
        carrier += kHarmonicAmp[h] *
                   std::sin(2.0 * std::numbers::pi * f * (sec - onset_s) + phases[h]);
      }
      const double am =
          1.0 - 0.5 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * am_rate * sec + am_phase));
      buzz[t] = carrier * am * edge_fade(t, lo, hi, fade);
    }
    const double buzz_power = mean_square(buzz, lo, hi);
    if (buzz_power > 0.0) {
      const double g = std::sqrt(noise_power * std::pow(10.0, meta.snr_db / 10.0) / buzz_power);
      for (std::size_t t = lo; t < hi; ++t) samples[t] += g * buzz[t];
    }

    std::vector<LabeledEvent> events{LabeledEvent{onset_s, offset_s, "mosquito"}};
    events.front().check_invariants();
    finish_clip(std::move(samples), std::move(meta), std::move(events));
  }

  for (std::size_t i = 0; i < cfg.n_negative; ++i) {
    SynthClipMeta meta;
    meta.name = make_name("neg", i);
    meta.split = in_test_split(i, cfg.test_fraction) ? "test" : "train";
    Rng rng = Rng::derive(seed, meta.name);

    const bool chirp = rng.bernoulli(cfg.chirp_prob);
    const double f_start = rng.uniform(200.0, 500.0);
    const double f_span = rng.uniform(300.0, 600.0);
    const double chirp_snr = rng.uniform(cfg.snr_db_lo, cfg.snr_db_hi);
    const bool test = meta.split == "test";
    meta.gain = std::exp(rng.uniform(std::log(test ? cfg.test_gain_lo : cfg.gain_lo),
                                     std::log(test ? cfg.test_gain_hi : cfg.gain_hi)));

    std::vector<double> samples = pink_noise(n_samples, kNoiseRms, rng);
    if (chirp) {
      const double noise_power = mean_square(samples, 0, n_samples);
      const std::size_t lo = n_samples / 4, hi = 3 * n_samples / 4;
      std::vector<double> tone(n_samples, 0.0);
      const double span_s = static_cast<double>(hi - lo) / cfg.sample_rate;
      for (std::size_t t = lo; t < hi; ++t) {
        const double u = static_cast<double>(t - lo) / cfg.sample_rate;
        // Linear chirp: phase integral of f_start + (f_span/span_s)*u.
        const double phase =
            2.0 * std::numbers::pi * (f_start * u + 0.5 * (f_span / span_s) * u * u);
        tone[t] = std::sin(phase) * edge_fade(t, lo, hi, fade);
      }
      const double tone_power = mean_square(tone, lo, hi);
      if (tone_power > 0.0) {
        const double g = std::sqrt(noise_power * std::pow(10.0, chirp_snr / 10.0) / tone_power);
        for (std::size_t t = lo; t < hi; ++t) samples[t] += g * tone[t];
      }
    }
    finish_clip(std::move(samples), std::move(meta), {});
  }

  for (std::size_t i = 0; i < cfg.n_noise; ++i) {
    Rng rng = Rng::derive(seed, "noise_" + std::to_string(i));
    AudioClip clip;
    clip.sample_rate = cfg.sample_rate;
    clip.samples = pink_noise(2 * n_samples, kNoiseRms, rng);
    res.noise_clips.push_back(std::move(clip));
  }

  return res;
}

// Write clips + manifest (+ noise dir) produced by synth_corpus.
inline void write_corpus(const SynthResult& res, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < res.clips.size(); ++i)
    save_wav((out_dir / res.manifest.entries[i].file).string(), res.clips[i]);
  Manifest m = res.manifest;
  m.base_dir = out_dir;
  save_manifest((out_dir / "manifest.csv").string(), m);
  if (!res.noise_clips.empty()) {
    const auto noise_dir = out_dir / "noise";
    std::filesystem::create_directories(noise_dir);
    for (std::size_t i = 0; i < res.noise_clips.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "noise_%04zu.wav", i);
      save_wav((noise_dir / buf).string(), res.noise_clips[i]);
    }
  }
}

}  // namespace buzzline
