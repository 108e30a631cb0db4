// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/manifest.hpp"

namespace buzzline {

inline std::vector<double> default_thresholds(std::size_t n = 50) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i)
    t[i] = static_cast<double>(i + 1) / static_cast<double>(n + 1);
  return t;
}

struct DetectConfig {
  std::vector<double> thresholds = default_thresholds();
  std::size_t median_window = 5;   // frames, odd
  double min_duration = 0.1;       // seconds
  double merge_gap = 0.1;          // seconds
  double window_hop_s = 0.96;      // inference window hop (50% of 1.92 s)

  void validate() const {
    if (thresholds.empty()) throw ConfigError("detect: empty threshold sweep");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0))
        throw ConfigError("detect: thresholds must lie in (0,1)");
      if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
        throw ConfigError("detect: thresholds must be strictly increasing");
    }
    if (median_window == 0 || median_window % 2 == 0)
      throw ConfigError("detect: median_window must be odd");
    if (min_duration < 0.0 || merge_gap < 0.0)
      throw ConfigError("detect: min_duration/merge_gap must be >= 0");
    if (!(window_hop_s > 0.0)) throw ConfigError("detect: window_hop must be > 0");
  }
};

struct FrameTrack {
  std::vector<double> probabilities;
  double frame_hop_s = 0.0;
  std::string clip_id;

  void check_invariants() const {
    if (!(frame_hop_s > 0.0)) throw UsageError("FrameTrack: frame_hop_s must be > 0");
    for (double p : probabilities)
      if (!(p >= 0.0 && p <= 1.0)) throw UsageError("FrameTrack: probability outside [0,1]");
  }
};

// Overlap-average window probabilities back onto the clip frame grid. Window w
// starts at frame w * hop_frames; a frame left uncovered is a coverage error.
inline FrameTrack stitch(const std::vector<std::vector<double>>& window_probs,
                         std::size_t hop_frames, double frame_hop_s,
                         const std::string& clip_id) {
  if (window_probs.empty()) throw UsageError("stitch: no windows");
  if (hop_frames == 0) throw UsageError("stitch: hop_frames must be > 0");
  std::size_t total = 0;
  for (std::size_t w = 0; w < window_probs.size(); ++w) {
    if (window_probs[w].empty()) throw UsageError("stitch: empty window");
    total = std::max(total, w * hop_frames + window_probs[w].size());
  }
  std::vector<double> sum(total, 0.0);
  std::vector<std::size_t> count(total, 0);
  for (std::size_t w = 0; w < window_probs.size(); ++w)
    for (std::size_t i = 0; i < window_probs[w].size(); ++i) {
      sum[w * hop_frames + i] += window_probs[w][i];
      ++count[w * hop_frames + i];
    }
  FrameTrack track;
  track.frame_hop_s = frame_hop_s;
  track.clip_id = clip_id;
  track.probabilities.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (count[i] == 0)
      throw DataError("stitch: coverage gap at frame " + std::to_string(i) + " of " +
                      clip_id);
    track.probabilities[i] = sum[i] / static_cast<double>(count[i]);
  }
  return track;
}

// odd-window median with edge replication
inline std::vector<double> median_filter(const std::vector<double>& x, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw UsageError("median_filter: window must be odd");
  if (window == 1 || x.empty()) return x;
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(window / 2);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size());
  std::vector<double> buf(window);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t k = -h; k <= h; ++k)
      buf[static_cast<std::size_t>(k + h)] = x[static_cast<std::size_t>(std::clamp(
          i + k, std::ptrdiff_t{0}, n - 1))];
    auto mid = buf.begin() + h;
    std::nth_element(buf.begin(), mid, buf.end());
    out[static_cast<std::size_t>(i)] = *mid;
  }
  return out;
}

// median filter -> binarize (p >= threshold) -> merge short gaps -> drop short
// events; times are frame_index * frame_hop_s
inline std::vector<LabeledEvent> to_events(const FrameTrack& track, double threshold,
                                           const DetectConfig& cfg) {
  cfg.validate();
  track.check_invariants();
  if (!(threshold > 0.0 && threshold < 1.0))
    throw UsageError("to_events: threshold must lie in (0,1)");
  const std::vector<double> smooth = median_filter(track.probabilities, cfg.median_window);

  struct Run {
    std::size_t first, last;  // inclusive frame indices
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    if (smooth[i] < threshold) continue;
    if (!runs.empty() && runs.back().last + 1 == i)
      runs.back().last = i;
    else
      runs.push_back({i, i});
  }

  const double hop = track.frame_hop_s;
  std::vector<Run> merged;
  for (const Run& r : runs) {
    if (!merged.empty()) {
      const double gap_s =
          static_cast<double>(r.first - merged.back().last - 1) * hop;
      if (gap_s < cfg.merge_gap) {
        merged.back().last = r.last;
        continue;
      }
    }
    merged.push_back(r);
  }

  std::vector<LabeledEvent> events;
  for (const Run& r : merged) {
    const double onset = static_cast<double>(r.first) * hop;
    const double offset = static_cast<double>(r.last + 1) * hop;
    if (offset - onset < cfg.min_duration) continue;
    LabeledEvent ev;
    ev.onset_s = onset;
    ev.offset_s = offset;
    events.push_back(ev);
  }
  return events;
}

}  // namespace buzzline
