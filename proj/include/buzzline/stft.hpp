// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "buzzline/audio.hpp"
#include "buzzline/common.hpp"
#include "buzzline/matrix.hpp"

namespace buzzline {

// Windowed STFT realized as a bank of 1-D convolutions whose kernels start at
// the exact windowed DFT basis and may then be trained like any other layer.

enum class WindowKind { kHann, kRectangular };

struct StftConfig {
  std::size_t frame_length = 1024;
  std::size_t hop_length = 128;
  WindowKind window = WindowKind::kHann;
  int sample_rate = 8000;

  std::size_t n_bins() const { return frame_length / 2 + 1; }

  void validate() const {
    if (frame_length == 0 || frame_length % 2 != 0)
      throw ConfigError("stft: frame_length must be positive and even");
    if (hop_length == 0 || hop_length > frame_length)
      throw ConfigError("stft: require 0 < hop_length <= frame_length");
    if (sample_rate <= 0) throw ConfigError("stft: sample_rate must be positive");
  }

  std::size_t n_frames(std::size_t n_samples) const {
    if (n_samples < frame_length) throw DataError("stft: clip shorter than one frame");
    return 1 + (n_samples - frame_length) / hop_length;
  }
};

inline std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::kHann) {
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  }
  return w;
}

// Convolution kernel bank, one row per frequency bin. At initialization row k
// is the windowed DFT basis:
//   real[k][n] =  window[n] * cos(2*pi*k*n / frame_length)
//   imag[k][n] = -window[n] * sin(2*pi*k*n / frame_length)
struct StftKernels {
  Matrix real;
  Matrix imag;
  bool trainable = true;

  static StftKernels fourier_init(const StftConfig& cfg) {
    cfg.validate();
    const std::size_t bins = cfg.n_bins();
    const std::size_t n = cfg.frame_length;
    const std::vector<double> w = make_window(cfg.window, n);
    StftKernels k;
    k.real = Matrix(bins, n);
    k.imag = Matrix(bins, n);
    for (std::size_t bin = 0; bin < bins; ++bin) {
      for (std::size_t i = 0; i < n; ++i) {
        const double angle =
            2.0 * std::numbers::pi * static_cast<double>(bin) * static_cast<double>(i) / n;
        k.real(bin, i) = w[i] * std::cos(angle);
        k.imag(bin, i) = -w[i] * std::sin(angle);
      }
    }
    return k;
  }
};

// Transposed kernel cache so the hot matmul streams contiguous rows. Refresh
// after every kernel update (the version counter makes staleness explicit).
struct StftKernelCache {
  Matrix real_t;  // [frame_length x n_bins]
  Matrix imag_t;
  std::uint64_t version = ~0ULL;

  void refresh(const StftKernels& k, std::uint64_t new_version) {
    real_t = transpose(k.real);
    imag_t = transpose(k.imag);
    version = new_version;
  }
};

struct Spectrogram {
  Matrix values;  // [n_bins x n_frames], non-negative power
  double bin_hz = 0.0;
  double frame_hop_s = 0.0;
};

// Forward state consumed by stft_backward.
struct StftSaved {
  Matrix frames;     // [n_frames x frame_length]
  Matrix resp_re_t;  // [n_frames x n_bins], pre-square responses
  Matrix resp_im_t;
  bool valid = false;
};

namespace stft_detail {

inline Matrix frame_signal(const AudioClip& clip, const StftConfig& cfg) {
  const std::size_t frames = cfg.n_frames(clip.samples.size());
  Matrix f(frames, cfg.frame_length);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = clip.samples.data() + t * cfg.hop_length;
    std::copy(src, src + cfg.frame_length, f.row(t));
  }
  return f;
}

}  // namespace stft_detail

// Batched-convolution power spectrogram:
//   values[k][t] = (sum_n real[k][n] x[t*hop+n])^2 + (sum_n imag[k][n] x[t*hop+n])^2
// The whole frame stack is one matrix product against the transposed kernels.
inline Spectrogram stft_forward(const AudioClip& clip, const StftKernels& kernels,
                                const StftConfig& cfg, const StftKernelCache& cache,
                                StftSaved* saved = nullptr) {
  cfg.validate();
  if (clip.sample_rate != cfg.sample_rate)
    throw ConfigError("stft: clip sample rate " + std::to_string(clip.sample_rate) +
                      " != config " + std::to_string(cfg.sample_rate));
  if (kernels.real.rows != cfg.n_bins() || kernels.real.cols != cfg.frame_length ||
      !kernels.real.same_shape(kernels.imag))
    throw ConfigError("stft: kernel shape does not match config");
  if (cache.real_t.rows != cfg.frame_length || cache.real_t.cols != cfg.n_bins())
    throw UsageError("stft: kernel cache not refreshed");

  Matrix frames = stft_detail::frame_signal(clip, cfg);
  Matrix re_t = matmul(frames, cache.real_t);  // [n_frames x n_bins]
  Matrix im_t = matmul(frames, cache.imag_t);

  Spectrogram spec;
  spec.bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.frame_length);
  spec.frame_hop_s = static_cast<double>(cfg.hop_length) / cfg.sample_rate;
  spec.values = Matrix(cfg.n_bins(), frames.rows);
  for (std::size_t t = 0; t < frames.rows; ++t) {
    const double* re = re_t.row(t);
    const double* im = im_t.row(t);
    for (std::size_t k = 0; k < cfg.n_bins(); ++k)
      spec.values(k, t) = re[k] * re[k] + im[k] * im[k];
  }

  if (saved != nullptr) {
    saved->frames = std::move(frames);
    saved->resp_re_t = std::move(re_t);
    saved->resp_im_t = std::move(im_t);
    saved->valid = true;
  }
  return spec;
}

// Convenience for frozen-kernel callers that do not hold a cache.
inline Spectrogram stft_forward(const AudioClip& clip, const StftKernels& kernels,
                                const StftConfig& cfg, StftSaved* saved = nullptr) {
  StftKernelCache cache;
  cache.refresh(kernels, 0);
  return stft_forward(clip, kernels, cfg, cache, saved);
}

struct StftGrads {
  Matrix d_real;  // same shape as the kernels
  Matrix d_imag;
};

// Chain rule through power = re^2 + im^2:
//   d real[k][n] = sum_t grad_out[k][t] * 2 * re[k][t] * frames[t][n]
// Input gradients are not produced; the clip is a leaf.
inline StftGrads stft_backward(const Matrix& grad_out, const StftSaved& saved) {
  if (!saved.valid) throw UsageError("stft_backward: no saved forward state");
  const std::size_t bins = saved.resp_re_t.cols;
  const std::size_t frames = saved.resp_re_t.rows;
  if (grad_out.rows != bins || grad_out.cols != frames)
    throw UsageError("stft_backward: grad shape " + grad_out.shape_str() + " != expected " +
                     std::to_string(bins) + "x" + std::to_string(frames));

  Matrix g_re(bins, frames), g_im(bins, frames);
  for (std::size_t k = 0; k < bins; ++k) {
    double* gr = g_re.row(k);
    double* gi = g_im.row(k);
    const double* go = grad_out.row(k);
    for (std::size_t t = 0; t < frames; ++t) {
      gr[t] = 2.0 * go[t] * saved.resp_re_t(t, k);
      gi[t] = 2.0 * go[t] * saved.resp_im_t(t, k);
    }
  }
  StftGrads grads;
  grads.d_real = matmul(g_re, saved.frames);
  grads.d_imag = matmul(g_im, saved.frames);
  return grads;
}

// Literal per-frame, per-bin dot products with the same kernels. This is the
// benchmark counterpart of the batched path, not the test oracle (tests carry
// their own independently written DFT).
inline Spectrogram stft_per_frame_naive(const AudioClip& clip, const StftKernels& kernels,
                                        const StftConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.sample_rate) throw ConfigError("stft: clip sample rate mismatch");
  const std::size_t frames = cfg.n_frames(clip.samples.size());
  const std::size_t bins = cfg.n_bins();

  Spectrogram spec;
  spec.bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.frame_length);
  spec.frame_hop_s = static_cast<double>(cfg.hop_length) / cfg.sample_rate;
  spec.values = Matrix(bins, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* x = clip.samples.data() + t * cfg.hop_length;
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      const double* kr = kernels.real.row(k);
      const double* ki = kernels.imag.row(k);
      for (std::size_t n = 0; n < cfg.frame_length; ++n) {
        re += kr[n] * x[n];
        im += ki[n] * x[n];
      }
      spec.values(k, t) = re * re + im * im;
    }
  }
  return spec;
}

}  // namespace buzzline
