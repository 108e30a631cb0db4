// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "buzzline/audio.hpp"
#include "buzzline/common.hpp"
#include "buzzline/rng.hpp"
#include "buzzline/stft.hpp"

namespace buzzline {

struct BenchReport {
  std::string strategy;
  double clips_per_second = 0.0;
  double wall_time_s = 0.0;  // median across repetitions
  double dispersion = 0.0;   // relative std of per-repetition wall times
  std::size_t repetitions = 0;
  std::size_t corpus_size = 0;
  StftConfig config;
};

using SpectrogramFn = std::function<Spectrogram(const AudioClip&)>;

// Cross-checks all strategies on every clip before any timing: a benchmark
// of divergent implementations is meaningless, so it refuses instead. The
// check pass doubles as warm-up and is excluded from timing.
inline std::vector<BenchReport> run_bench_custom(
    const std::vector<AudioClip>& clips,
    const std::vector<std::pair<std::string, SpectrogramFn>>& strategies,
    std::size_t repetitions, const StftConfig& cfg, double tolerance = 1e-6) {
  if (clips.empty()) throw UsageError("bench: no clips");
  if (strategies.size() < 2) throw UsageError("bench: need at least two strategies");
  if (repetitions < 3) throw ConfigError("bench: repetitions must be >= 3");

  for (std::size_t c = 0; c < clips.size(); ++c) {
    const Spectrogram ref = strategies[0].second(clips[c]);
    for (std::size_t s = 1; s < strategies.size(); ++s) {
      const Spectrogram other = strategies[s].second(clips[c]);
      const double diff = relative_frobenius_diff(ref.values, other.values);
      if (!(diff <= tolerance))
        throw NumericError("bench: outputs of '" + strategies[0].first + "' and '" +
                           strategies[s].first + "' diverge on clip " + std::to_string(c) +
                           " (relative diff " + std::to_string(diff) +
                           "); refusing to report timings");
    }
  }

  std::vector<BenchReport> reports;
  double sink = 0.0;  // keeps the measured loops observable
  for (const auto& [name, fn] : strategies) {
    std::vector<double> walls;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (const AudioClip& clip : clips) {
        const Spectrogram s = fn(clip);
        sink += s.values(0, 0);
      }
      const auto t1 = std::chrono::steady_clock::now();
      walls.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::vector<double> sorted = walls;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    double mean = 0.0;
    for (double w : walls) mean += w;
    mean /= static_cast<double>(walls.size());
    double var = 0.0;
    for (double w : walls) var += (w - mean) * (w - mean);
    var /= static_cast<double>(walls.size());

    BenchReport r;
    r.strategy = name;
    r.wall_time_s = median;
    r.clips_per_second = static_cast<double>(clips.size()) / median;
    r.dispersion = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    r.repetitions = repetitions;
    r.corpus_size = clips.size();
    r.config = cfg;
    reports.push_back(std::move(r));
  }
  if (!std::isfinite(sink)) throw NumericError("bench: non-finite spectrogram output");
  return reports;
}

inline std::vector<AudioClip> bench_clips(std::size_t n, const StftConfig& cfg,
                                          double duration_s, std::uint64_t seed) {
  std::vector<AudioClip> clips;
  Rng rng = Rng::derive(seed, "bench");
  const std::size_t len = static_cast<std::size_t>(duration_s * cfg.sample_rate);
  for (std::size_t i = 0; i < n; ++i) {
    AudioClip c;
    c.sample_rate = cfg.sample_rate;
    c.samples.resize(len);
    for (double& s : c.samples) s = rng.normal() * 0.1;
    clips.push_back(std::move(c));
  }
  return clips;
}

// standard comparison: literal per-frame DFT dot products vs. the batched
// matmul path, identical Fourier-initialized kernels
inline std::vector<BenchReport> run_bench(std::size_t corpus_size, const StftConfig& cfg,
                                          std::size_t repetitions, std::uint64_t seed,
                                          double clip_duration_s = 1.92) {
  cfg.validate();
  const std::vector<AudioClip> clips = bench_clips(corpus_size, cfg, clip_duration_s, seed);
  const StftKernels kernels = StftKernels::fourier_init(cfg);
  StftKernelCache cache;
  cache.refresh(kernels, 0);
  std::vector<std::pair<std::string, SpectrogramFn>> strategies = {
      {"per_frame_naive_dft",
       [&](const AudioClip& c) { return stft_per_frame_naive(c, kernels, cfg); }},
      {"batched_conv",
       [&](const AudioClip& c) { return stft_forward(c, kernels, cfg, cache, nullptr); }},
  };
  return run_bench_custom(clips, strategies, repetitions, cfg);
}

}  // namespace buzzline
