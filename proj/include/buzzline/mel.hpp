// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/matrix.hpp"
#include "buzzline/stft.hpp"

namespace buzzline {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters with peaks equally spaced on the HTK mel scale,
// peak-normalized after sampling at the STFT bin frequencies. The filterbank
// is fixed (not trainable).
struct MelFilterbank {
  Matrix weights;    // [n_mels x n_bins]
  Matrix weights_t;  // cached transpose for the backward pass
  std::vector<double> f_lo, f_peak, f_hi;  // continuous triangle edges, Hz
  double f_min = 0.0, f_max = 0.0;

  std::size_t n_mels() const { return weights.rows; }

  // Unnormalized continuous triangle of filter m evaluated at f (Hz).
  double triangle_at(std::size_t m, double f) const {
    if (f <= f_lo[m] || f >= f_hi[m]) return 0.0;
    if (f <= f_peak[m]) return (f - f_lo[m]) / (f_peak[m] - f_lo[m]);
    return (f_hi[m] - f) / (f_hi[m] - f_peak[m]);
  }
};

inline MelFilterbank mel_filterbank_build(const StftConfig& cfg, std::size_t n_mels, double f_min,
                                          double f_max) {
  cfg.validate();
  if (n_mels == 0) throw ConfigError("mel: n_mels must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= cfg.sample_rate / 2.0 + 1e-9))
    throw ConfigError("mel: require 0 <= f_min < f_max <= sample_rate/2");

  MelFilterbank fb;
  fb.f_min = f_min;
  fb.f_max = f_max;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  fb.f_lo.resize(n_mels);
  fb.f_peak.resize(n_mels);
  fb.f_hi.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double step = (mel_hi - mel_lo) / static_cast<double>(n_mels + 1);
    fb.f_lo[m] = mel_to_hz(mel_lo + step * static_cast<double>(m));
    fb.f_peak[m] = mel_to_hz(mel_lo + step * static_cast<double>(m + 1));
    fb.f_hi[m] = mel_to_hz(mel_lo + step * static_cast<double>(m + 2));
  }

  const std::size_t bins = cfg.n_bins();
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.frame_length);
  fb.weights = Matrix(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double w = fb.triangle_at(m, static_cast<double>(k) * bin_hz);
      fb.weights(m, k) = w;
      peak = std::max(peak, w);
    }
    if (peak <= 0.0)
      throw ConfigError("mel: filter " + std::to_string(m) +
                        " covers no STFT bin; raise frame_length or lower n_mels");
    for (std::size_t k = 0; k < bins; ++k) fb.weights(m, k) /= peak;
  }
  fb.weights_t = transpose(fb.weights);
  return fb;
}

// Mel energies = weights * spectrogram values.
inline Matrix mel_apply(const Matrix& spec_values, const MelFilterbank& fb) {
  if (fb.weights.cols != spec_values.rows)
    throw ConfigError("mel: filterbank expects " + std::to_string(fb.weights.cols) +
                      " bins, spectrogram has " + std::to_string(spec_values.rows));
  return matmul(fb.weights, spec_values);
}

// d(spec values) = weights^T * grad_out.
inline Matrix mel_backward(const Matrix& grad_out, const MelFilterbank& fb) {
  if (grad_out.rows != fb.weights.rows)
    throw UsageError("mel_backward: grad rows != n_mels");
  return matmul(fb.weights_t, grad_out);
}

// Baseline log compression retained for the ablation arm: ln(x + floor).
inline Matrix log_compress(const Matrix& mel, double floor = 1e-8) {
  if (floor <= 0.0) throw ConfigError("log_compress: floor must be positive");
  Matrix out(mel.rows, mel.cols);
  for (std::size_t i = 0; i < mel.data.size(); ++i) out.data[i] = std::log(mel.data[i] + floor);
  return out;
}

inline Matrix log_compress_backward(const Matrix& grad_out, const Matrix& mel,
                                    double floor = 1e-8) {
  if (!grad_out.same_shape(mel)) throw UsageError("log_compress_backward: shape mismatch");
  Matrix out(mel.rows, mel.cols);
  for (std::size_t i = 0; i < mel.data.size(); ++i)
    out.data[i] = grad_out.data[i] / (mel.data[i] + floor);
  return out;
}

}  // namespace buzzline
