// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "buzzline/common.hpp"

namespace buzzline {

// Mono sample buffer, nominal range [-1, 1]. The unit of ingestion,
// segmentation and augmentation.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  double peak() const {
    double p = 0.0;
    for (double s : samples) p = std::max(p, std::abs(s));
    return p;
  }

  // Mean squared amplitude.
  double power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return acc / static_cast<double>(samples.size());
  }

  void check_invariants() const {
    if (samples.empty()) throw DataError("AudioClip: empty sample buffer");
    if (sample_rate <= 0) throw DataError("AudioClip: non-positive sample rate");
  }
};

}  // namespace buzzline
