// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "buzzline/audio.hpp"
#include "buzzline/common.hpp"
#include "buzzline/matrix.hpp"
#include "buzzline/rng.hpp"
#include "buzzline/wav.hpp"

namespace buzzline {

// ---------------------------------------------------------------------------
// SNR-controlled waveform mixing
// ---------------------------------------------------------------------------

struct MixSpec {
  double probability = 0.5;  // "every other recording"
  double snr_db_lo = -5.0;
  double snr_db_hi = 20.0;
  std::string noise_dir;

  void validate() const {
    if (probability < 0.0 || probability > 1.0)
      throw ConfigError("mix: probability outside [0,1]");
    if (snr_db_lo > snr_db_hi) throw ConfigError("mix: snr_db range inverted");
  }
};

// Crop (at `offset`) or tile the noise to exactly `len` samples.
inline AudioClip fit_noise(const AudioClip& noise, std::size_t len, std::size_t offset = 0) {
  noise.check_invariants();
  AudioClip out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(len);
  const std::size_t n = noise.samples.size();
  for (std::size_t i = 0; i < len; ++i) out.samples[i] = noise.samples[(offset + i) % n];
  return out;
}

// output = clip + g * noise with g chosen so the clip-to-scaled-noise power
// ratio equals snr_db. Zero-power noise passes the clip through. The sum is
// peak-renormalized only when it would exceed 1.
inline AudioClip mix(const AudioClip& clip, const AudioClip& noise, double snr_db) {
  clip.check_invariants();
  if (noise.sample_rate != clip.sample_rate)
    throw ConfigError("mix: sample rate mismatch (" + std::to_string(clip.sample_rate) + " vs " +
                      std::to_string(noise.sample_rate) + ")");
  const AudioClip fitted =
      noise.samples.size() == clip.samples.size() ? noise : fit_noise(noise, clip.samples.size());

  const double p_clip = clip.power();
  const double p_noise = fitted.power();
  if (p_noise == 0.0) return clip;

  const double g = std::sqrt(p_clip / (p_noise * std::pow(10.0, snr_db / 10.0)));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = clip.samples[i] + g * fitted.samples[i];

  const double pk = out.peak();
  if (pk > 1.0) {
    for (double& s : out.samples) s /= pk;
  }
  return out;
}

// In-memory noise corpus loaded once at startup from a directory of WAVs.
class NoiseLibrary {
 public:
  NoiseLibrary() = default;

  static NoiseLibrary from_dir(const std::string& dir, int expected_rate) {
    NoiseLibrary lib;
    std::vector<std::filesystem::path> files;
    if (!dir.empty() && std::filesystem::is_directory(dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
          files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      AudioClip clip = load_wav(f.string());
      if (clip.sample_rate != expected_rate)
        throw ConfigError("noise dir: " + f.filename().string() + " has rate " +
                          std::to_string(clip.sample_rate) + ", expected " +
                          std::to_string(expected_rate));
      lib.clips_.push_back(std::move(clip));
    }
    return lib;
  }

  std::size_t size() const { return clips_.size(); }
  const AudioClip& at(std::size_t i) const { return clips_.at(i); }

 private:
  std::vector<AudioClip> clips_;
};

// With probability `spec.probability`, a uniformly chosen noise clip at a
// uniformly chosen crop offset, fitted to `segment_len`; otherwise nothing.
// Draw order: bernoulli, file index, offset.
inline std::optional<AudioClip> sample_noise(const MixSpec& spec, const NoiseLibrary& lib,
                                             std::size_t segment_len, Rng& rng) {
  spec.validate();
  if (spec.probability > 0.0 && lib.size() == 0)
    throw ConfigError("mix: probability > 0 but noise library is empty");
  if (!rng.bernoulli(spec.probability)) return std::nullopt;
  const auto idx = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(lib.size()) - 1));
  const AudioClip& chosen = lib.at(idx);
  const auto offset = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(chosen.samples.size()) - 1));
  return fit_noise(chosen, segment_len, offset);
}

// ---------------------------------------------------------------------------
// Random time/frequency masking
// ---------------------------------------------------------------------------

enum class MaskValue { kZero, kPerChannelMean };

struct MaskSpec {
  std::size_t n_freq_masks = 2;
  std::size_t max_freq_width = 8;   // mel bins
  std::size_t n_time_masks = 2;
  std::size_t max_time_width = 12;  // frames
  MaskValue mask_value = MaskValue::kPerChannelMean;
};

struct MaskPlan {
  // [start, start+width) spans actually applied.
  std::vector<std::pair<std::size_t, std::size_t>> freq_spans;
  std::vector<std::pair<std::size_t, std::size_t>> time_spans;
};

// For each mask: width uniform in [0, max_width], start uniform in
// [0, axis - width]. Frequency masks span all frames; time masks span all
// channels. Unmasked cells are untouched. Gradients are cut at masked cells
// (stop-gradient semantics); callers use the returned plan for that.
inline Matrix apply_masks(const Matrix& features, const MaskSpec& spec, Rng& rng,
                          MaskPlan* plan = nullptr) {
  const std::size_t channels = features.rows;
  const std::size_t frames = features.cols;
  if ((spec.n_freq_masks > 0 && spec.max_freq_width >= channels) ||
      (spec.n_time_masks > 0 && spec.max_time_width >= frames))
    throw ConfigError("masks: max width must be smaller than the masked axis");

  std::vector<double> channel_mean(channels, 0.0);
  if (spec.mask_value == MaskValue::kPerChannelMean && frames > 0) {
    for (std::size_t f = 0; f < channels; ++f) {
      const double* row = features.row(f);
      double acc = 0.0;
      for (std::size_t t = 0; t < frames; ++t) acc += row[t];
      channel_mean[f] = acc / static_cast<double>(frames);
    }
  }

  Matrix out = features;
  MaskPlan local;
  for (std::size_t i = 0; i < spec.n_freq_masks; ++i) {
    const auto width = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(spec.max_freq_width)));
    const auto start = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(channels - width)));
    local.freq_spans.emplace_back(start, width);
    for (std::size_t f = start; f < start + width; ++f) {
      double* row = out.row(f);
      const double v = spec.mask_value == MaskValue::kZero ? 0.0 : channel_mean[f];
      for (std::size_t t = 0; t < frames; ++t) row[t] = v;
    }
  }
  for (std::size_t i = 0; i < spec.n_time_masks; ++i) {
    const auto width = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(spec.max_time_width)));
    const auto start = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(frames - width)));
    local.time_spans.emplace_back(start, width);
    for (std::size_t t = start; t < start + width; ++t) {
      for (std::size_t f = 0; f < channels; ++f) {
        out(f, t) = spec.mask_value == MaskValue::kZero ? 0.0 : channel_mean[f];
      }
    }
  }
  if (plan != nullptr) *plan = std::move(local);
  return out;
}

// Zero the gradient inside masked spans (masking is data augmentation, not a
// differentiable layer).
inline void mask_cut_gradient(Matrix& grad, const MaskPlan& plan) {
  for (const auto& [start, width] : plan.freq_spans)
    for (std::size_t f = start; f < start + width; ++f)
      for (std::size_t t = 0; t < grad.cols; ++t) grad(f, t) = 0.0;
  for (const auto& [start, width] : plan.time_spans)
    for (std::size_t t = start; t < start + width; ++t)
      for (std::size_t f = 0; f < grad.rows; ++f) grad(f, t) = 0.0;
}

}  // namespace buzzline
