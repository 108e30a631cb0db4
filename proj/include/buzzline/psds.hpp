// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/manifest.hpp"

namespace buzzline {

struct PsdsConfig {
  double dtc_threshold = 0.5;    // rho_DTC
  double gtc_threshold = 0.5;    // rho_GTC
  double e_max = 100.0;          // FP/hour axis limit
  double dataset_duration_h = 0.0;

  void validate() const {
    if (dtc_threshold < 0.0 || dtc_threshold > 1.0 || gtc_threshold < 0.0 ||
        gtc_threshold > 1.0)
      throw ConfigError("psds: tolerance thresholds must lie in [0,1]");
    if (!(e_max > 0.0)) throw ConfigError("psds: e_max must be > 0");
    if (!(dataset_duration_h > 0.0))
      throw ConfigError("psds: dataset_duration_h must be > 0");
  }
};

struct OperatingPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double efpr = 0.0;  // false positives per hour
};

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    return *this;
  }
};

inline double event_overlap(const LabeledEvent& a, const LabeledEvent& b) {
  return std::max(0.0, std::min(a.offset_s, b.offset_s) - std::max(a.onset_s, b.onset_s));
}

// Single-class detection/ground-truth tolerance matching:
//  - a detection is DTC-valid iff its summed intersection with all ground
//    truth covers >= rho_DTC of its own duration; otherwise it is an FP;
//  - a ground-truth event is a TP iff its summed intersection with DTC-valid
//    detections covers >= rho_GTC of its duration.
inline MatchCounts match_events(const std::vector<LabeledEvent>& detections,
                                const std::vector<LabeledEvent>& ground_truth,
                                const PsdsConfig& cfg) {
  MatchCounts counts;
  std::vector<const LabeledEvent*> valid;
  for (const LabeledEvent& det : detections) {
    det.check_invariants();
    double inter = 0.0;
    for (const LabeledEvent& gt : ground_truth) inter += event_overlap(det, gt);
    if (inter >= cfg.dtc_threshold * (det.offset_s - det.onset_s))
      valid.push_back(&det);
    else
      ++counts.fp;
  }
  for (const LabeledEvent& gt : ground_truth) {
    gt.check_invariants();
    double inter = 0.0;
    for (const LabeledEvent* det : valid) inter += event_overlap(*det, gt);
    if (inter >= cfg.gtc_threshold * (gt.offset_s - gt.onset_s)) ++counts.tp;
  }
  return counts;
}

struct ThresholdResult {
  double threshold = 0.0;
  MatchCounts counts;
};

// raw operating points (one per threshold); the staircase envelope is taken
// at scoring time
inline std::vector<OperatingPoint> psd_roc(const std::vector<ThresholdResult>& results,
                                           std::size_t n_ground_truth,
                                           const PsdsConfig& cfg) {
  cfg.validate();
  if (n_ground_truth == 0) throw DataError("psds: zero ground-truth events, tpr undefined");
  std::vector<OperatingPoint> points;
  for (const ThresholdResult& r : results) {
    OperatingPoint p;
    p.threshold = r.threshold;
    p.tpr = static_cast<double>(r.counts.tp) / static_cast<double>(n_ground_truth);
    p.efpr = static_cast<double>(r.counts.fp) / cfg.dataset_duration_h;
    points.push_back(p);
  }
  return points;
}

// max tpr among operating points with efpr <= e; 0 when none qualify
inline double envelope_tpr(const std::vector<OperatingPoint>& points, double e) {
  double best = 0.0;
  for (const OperatingPoint& p : points)
    if (p.efpr <= e) best = std::max(best, p.tpr);
  return best;
}

// Area under the staircase envelope on [0, e_max], normalized by e_max. The
// envelope is a right-continuous step function jumping at point efprs, zero
// before the first reachable point, constant after the last one.
inline double psds_score(const std::vector<OperatingPoint>& points, const PsdsConfig& cfg) {
  cfg.validate();
  if (points.empty()) throw UsageError("psds_score: empty roc");
  std::vector<double> breaks;
  breaks.push_back(0.0);
  for (const OperatingPoint& p : points)
    if (p.efpr >= 0.0 && p.efpr <= cfg.e_max) breaks.push_back(p.efpr);
  breaks.push_back(cfg.e_max);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    area += envelope_tpr(points, breaks[i]) * (breaks[i + 1] - breaks[i]);
  return area / cfg.e_max;
}

}  // namespace buzzline
