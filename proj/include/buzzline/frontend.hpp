// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "buzzline/audio.hpp"
#include "buzzline/common.hpp"
#include "buzzline/matrix.hpp"
#include "buzzline/mel.hpp"
#include "buzzline/params.hpp"
#include "buzzline/pcen.hpp"
#include "buzzline/stft.hpp"

namespace buzzline {

enum class Compression { kPcen, kLog };
enum class PcenPosition { kAfterMel, kBeforeMel };

inline Compression compression_from_string(const std::string& s) {
  if (s == "pcen") return Compression::kPcen;
  if (s == "log") return Compression::kLog;
  throw ConfigError("unknown compression: " + s);
}
inline std::string to_string(Compression c) { return c == Compression::kPcen ? "pcen" : "log"; }

inline PcenPosition pcen_position_from_string(const std::string& s) {
  if (s == "after_mel") return PcenPosition::kAfterMel;
  if (s == "before_mel") return PcenPosition::kBeforeMel;
  throw ConfigError("unknown pcen_position: " + s);
}
inline std::string to_string(PcenPosition p) {
  return p == PcenPosition::kAfterMel ? "after_mel" : "before_mel";
}

struct FrontendConfig {
  StftConfig stft;
  std::size_t n_mels = 64;
  double f_min = 50.0;
  double f_max = 0.0;  // 0 -> sample_rate / 2
  PcenParams pcen;
  Compression compression = Compression::kPcen;
  PcenPosition pcen_position = PcenPosition::kAfterMel;
  bool trainable_kernels = true;
  double log_floor = 1e-8;

  double resolved_f_max() const {
    return f_max > 0.0 ? f_max : static_cast<double>(stft.sample_rate) / 2.0;
  }

  void validate() const {
    stft.validate();
    pcen.validate();
    if (n_mels == 0) throw ConfigError("frontend: n_mels must be > 0");
    if (!(log_floor > 0.0)) throw ConfigError("frontend: log_floor must be > 0");
    if (!(f_min >= 0.0) || !(f_min < resolved_f_max()))
      throw ConfigError("frontend: require 0 <= f_min < f_max");
    if (resolved_f_max() > static_cast<double>(stft.sample_rate) / 2.0)
      throw ConfigError("frontend: f_max above Nyquist");
  }
};

struct FrontendSaved {
  StftSaved stft;
  PcenSaved pcen;
  Matrix mel_in;  // input of the log stage (mel energies), when compression=log
  bool valid = false;
};

// STFT -> mel -> {PCEN | log} with gradients flowing back into the STFT
// kernels and the PCEN parameters. Owns the trainable buffers; the ParamStore
// holds views into them.
class Frontend {
 public:
  explicit Frontend(const FrontendConfig& cfg)
      : cfg_(cfg),
        kernels_(StftKernels::fourier_init(cfg.stft)),
        fb_(mel_filterbank_build(cfg.stft, cfg.n_mels, cfg.f_min, cfg.resolved_f_max())) {
    cfg_.validate();
    kernels_.trainable = cfg_.trainable_kernels;
    cache_.refresh(kernels_, ++version_);
  }

  const FrontendConfig& config() const { return cfg_; }
  const StftKernels& kernels() const { return kernels_; }
  StftKernels& kernels_mut() { return kernels_; }
  const MelFilterbank& filterbank() const { return fb_; }
  const PcenParams& pcen() const { return cfg_.pcen; }

  std::size_t n_frames(std::size_t n_samples) const { return cfg_.stft.n_frames(n_samples); }
  double frame_hop_s() const {
    return static_cast<double>(cfg_.stft.hop_length) / cfg_.stft.sample_rate;
  }

  void register_params(ParamStore& store, double frontend_lr_scale) {
    store.add({"frontend.stft.real_kernels", kernels_.real.data.data(), kernels_.real.rows,
               kernels_.real.cols, kernels_.trainable, frontend_lr_scale});
    store.add({"frontend.stft.imag_kernels", kernels_.imag.data.data(), kernels_.imag.rows,
               kernels_.imag.cols, kernels_.trainable, frontend_lr_scale});
    PcenParams& p = cfg_.pcen;
    store.add({"frontend.pcen.alpha", &p.alpha, 1, 1, p.train_alpha, frontend_lr_scale, 0.0});
    store.add({"frontend.pcen.delta", &p.delta, 1, 1, p.train_delta, frontend_lr_scale, 0.0});
    store.add({"frontend.pcen.r", &p.r, 1, 1, p.train_r, frontend_lr_scale, 1e-6});
    store.add(
        {"frontend.pcen.s", &p.s, 1, 1, p.train_s, frontend_lr_scale, 1e-6, 1.0});
  }

  // Call after any external mutation of the kernel buffers (optimizer step,
  // checkpoint load): re-derives the transposed matmul cache.
  void on_params_updated() { cache_.refresh(kernels_, ++version_); }

  // segment -> [n_mels x n_frames] features
  Matrix forward(const AudioClip& segment, FrontendSaved* saved = nullptr) const {
    FrontendSaved local;
    FrontendSaved& sv = saved != nullptr ? *saved : local;
    sv = FrontendSaved{};
    const Spectrogram spec = stft_forward(segment, kernels_, cfg_.stft, cache_, &sv.stft);

    Matrix out;
    if (cfg_.compression == Compression::kPcen &&
        cfg_.pcen_position == PcenPosition::kBeforeMel) {
      Matrix p = pcen_forward(spec.values, cfg_.pcen, &sv.pcen);
      out = mel_apply(p, fb_);
    } else {
      Matrix mel = mel_apply(spec.values, fb_);
      if (cfg_.compression == Compression::kPcen) {
        out = pcen_forward(mel, cfg_.pcen, &sv.pcen);
      } else {
        sv.mel_in = mel;
        out = log_compress(mel, cfg_.log_floor);
      }
    }
    sv.valid = true;
    return out;
  }

  // Accumulates kernel/PCEN gradients into rec (frozen parameters stay
  // absent). The clip itself is a leaf: no input gradient.
  void backward(const Matrix& d_out, const FrontendSaved& saved, GradientRecord& rec) const {
    if (!saved.valid) throw UsageError("frontend backward without forward state");
    Matrix d_spec;
    if (cfg_.compression == Compression::kPcen &&
        cfg_.pcen_position == PcenPosition::kBeforeMel) {
      Matrix d_pcen_out = mel_backward(d_out, fb_);
      PcenGrads pg = pcen_backward(d_pcen_out, saved.pcen);
      accumulate_pcen(pg, rec);
      d_spec = std::move(pg.d_input);
    } else if (cfg_.compression == Compression::kPcen) {
      PcenGrads pg = pcen_backward(d_out, saved.pcen);
      accumulate_pcen(pg, rec);
      d_spec = mel_backward(pg.d_input, fb_);
    } else {
      Matrix d_mel = log_compress_backward(d_out, saved.mel_in, cfg_.log_floor);
      d_spec = mel_backward(d_mel, fb_);
    }
    if (kernels_.trainable) {
      StftGrads sg = stft_backward(d_spec, saved.stft);
      record_add(rec, "frontend.stft.real_kernels", sg.d_real.data.data(),
                 sg.d_real.data.size());
      record_add(rec, "frontend.stft.imag_kernels", sg.d_imag.data.data(),
                 sg.d_imag.data.size());
    }
  }

 private:
  void accumulate_pcen(const PcenGrads& pg, GradientRecord& rec) const {
    const PcenParams& p = cfg_.pcen;
    if (p.train_alpha) record_add(rec, "frontend.pcen.alpha", &pg.d_alpha, 1);
    if (p.train_delta) record_add(rec, "frontend.pcen.delta", &pg.d_delta, 1);
    if (p.train_r) record_add(rec, "frontend.pcen.r", &pg.d_r, 1);
    if (p.train_s) record_add(rec, "frontend.pcen.s", &pg.d_s, 1);
  }

  FrontendConfig cfg_;
  StftKernels kernels_;
  StftKernelCache cache_;
  MelFilterbank fb_;
  std::uint64_t version_ = 0;
};

}  // namespace buzzline
