// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/matrix.hpp"
#include "buzzline/params.hpp"
#include "buzzline/rng.hpp"

namespace buzzline {

// channel-major 3-d buffer (channels x height x width)
struct Tensor3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
};

struct ConvBlockConfig {
  std::size_t out_channels = 8;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
};

struct TinyCnnConfig {
  std::vector<ConvBlockConfig> conv_blocks = {{8, 3, 3, 1}, {16, 3, 3, 1}, {16, 3, 3, 1}};
  std::size_t hidden_dim = 32;
  double dropout_p = 0.0;

  void validate() const {
    if (conv_blocks.empty()) throw ConfigError("model: need at least one conv block");
    for (const auto& b : conv_blocks) {
      if (b.out_channels == 0) throw ConfigError("model: conv out_channels must be > 0");
      if (b.kernel_h % 2 == 0 || b.kernel_w % 2 == 0)
        throw ConfigError("model: conv kernel dims must be odd (same padding)");
      if (b.stride == 0) throw ConfigError("model: conv stride must be >= 1");
    }
    if (hidden_dim == 0) throw ConfigError("model: hidden_dim must be > 0");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw ConfigError("model: dropout_p must be in [0,1)");
  }
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logit, mean-reduced
};

// Mean BCE-with-logits in the stable max(z,0) - z*y + ln(1+e^{-|z|}) form.
inline BceResult bce_loss(const std::vector<double>& logits, const std::vector<double>& labels) {
  if (logits.size() != labels.size() || logits.empty())
    throw UsageError("bce_loss: size mismatch or empty batch");
  BceResult out;
  out.grad.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = labels[i];
    if (y != 0.0 && y != 1.0) throw UsageError("bce_loss: labels must be 0 or 1");
    out.loss += (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)))) * inv_n;
    out.grad[i] = (sigmoid(z) - y) * inv_n;
  }
  return out;
}

struct ConvBlockSaved {
  Tensor3 input;
  Tensor3 preact;                // conv output before ReLU
  Tensor3 pooled;                // after ReLU + 2x1 freq pool
  std::vector<std::uint8_t> argmax;  // which of the two pooled rows won
};

struct CnnSaved {
  std::vector<ConvBlockSaved> blocks;
  Matrix head_in;                 // [n_cols x fan_in]
  Matrix hidden_pre;              // [n_cols x hidden]
  std::vector<double> drop_scale;  // inverted-dropout multiplier, empty in eval
  std::vector<double> frame_logits;
  std::vector<double> lme_softmax;  // d segment_logit / d frame_logit
  double segment_logit = 0.0;
  bool valid = false;
};

// log-mean-exp, the smooth "any frame fired" pool over frame logits
inline double log_mean_exp(const std::vector<double>& z, std::vector<double>* softmax = nullptr) {
  if (z.empty()) throw UsageError("log_mean_exp: empty input");
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  if (softmax != nullptr) {
    softmax->resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) (*softmax)[i] = std::exp(z[i] - m) / s;
  }
  return m + std::log(s) - std::log(static_cast<double>(z.size()));
}

// Small conv stack over mel-time feature maps with a per-frame linear head.
// Weights live here; the ParamStore only holds views.
class TinyCnn {
 public:
  TinyCnn(const TinyCnnConfig& cfg, std::size_t in_height, Rng& init_rng)
      : cfg_(cfg), in_height_(in_height) {
    cfg_.validate();
    if (in_height_ == 0) throw ConfigError("model: input height must be > 0");
    std::size_t c = 1, h = in_height_;
    for (const auto& b : cfg_.conv_blocks) {
      const std::size_t fan_in = c * b.kernel_h * b.kernel_w;
      Matrix w(b.out_channels, fan_in);
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : w.data) v = init_rng.normal() * stddev;
      weights_.push_back(std::move(w));
      biases_.emplace_back(b.out_channels, 0.01);  // off the ReLU kink at init
      c = b.out_channels;
      h = (h - 1) / b.stride + 1;  // same padding, odd kernel
      if (h < 2) throw ConfigError("model: feature height collapses below 2 before pooling");
      h /= 2;
    }
    out_channels_ = c;
    out_height_ = h;
    const std::size_t fan = fan_in_head();
    w1_ = Matrix(cfg_.hidden_dim, fan);
    const double s1 = std::sqrt(2.0 / static_cast<double>(fan));
    for (double& v : w1_.data) v = init_rng.normal() * s1;
    b1_.assign(cfg_.hidden_dim, 0.01);  // slight positive bias keeps ReLUs alive at init
    w2_.assign(cfg_.hidden_dim, 0.0);
    const double s2 = std::sqrt(1.0 / static_cast<double>(cfg_.hidden_dim));
    for (double& v : w2_) v = init_rng.normal() * s2;
    b2_ = 0.0;
  }

  const TinyCnnConfig& config() const { return cfg_; }
  std::size_t input_height() const { return in_height_; }
  std::size_t fan_in_head() const { return out_channels_ * out_height_; }

  // product of conv strides: frame logits live at hop * time_stride seconds
  std::size_t time_stride_total() const {
    std::size_t s = 1;
    for (const auto& b : cfg_.conv_blocks) s *= b.stride;
    return s;
  }

  void register_params(ParamStore& store) {
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const std::string base = "model.conv" + std::to_string(i + 1);
      store.add({base + ".weight", weights_[i].data.data(), weights_[i].rows, weights_[i].cols});
      store.add({base + ".bias", biases_[i].data(), biases_[i].size(), 1});
    }
    store.add({"model.head.w1", w1_.data.data(), w1_.rows, w1_.cols});
    store.add({"model.head.b1", b1_.data(), b1_.size(), 1});
    store.add({"model.head.w2", w2_.data(), w2_.size(), 1});
    store.add({"model.head.b2", &b2_, 1, 1});
  }

  // features: [height x width] = mel x frames; train=true enables dropout
  void forward(const Matrix& features, bool train, Rng* dropout_rng, CnnSaved& saved) const {
    if (features.rows != in_height_)
      throw ConfigError("model: feature height " + std::to_string(features.rows) +
                        " does not match configured input height " + std::to_string(in_height_));
    if (features.cols == 0) throw ConfigError("model: empty feature map");
    saved = CnnSaved{};
    Tensor3 cur(1, features.rows, features.cols);
    cur.data = features.data;
    for (std::size_t i = 0; i < cfg_.conv_blocks.size(); ++i) {
      ConvBlockSaved bs;
      bs.input = cur;
      bs.preact = conv2d(cur, weights_[i], biases_[i], cfg_.conv_blocks[i]);
      Tensor3 act = bs.preact;
      for (double& v : act.data) v = std::max(v, 0.0);
      pool_freq2(act, bs.pooled, bs.argmax);
      cur = bs.pooled;
      saved.blocks.push_back(std::move(bs));
    }
    const std::size_t n_cols = cur.width, fan = fan_in_head();
    saved.head_in = Matrix(n_cols, fan);
    for (std::size_t t = 0; t < n_cols; ++t)
      for (std::size_t c = 0; c < cur.channels; ++c)
        for (std::size_t y = 0; y < cur.height; ++y)
          saved.head_in(t, c * cur.height + y) = cur.at(c, y, t);

    saved.hidden_pre = Matrix(n_cols, cfg_.hidden_dim);
    saved.frame_logits.assign(n_cols, 0.0);
    const bool use_dropout = train && cfg_.dropout_p > 0.0;
    if (use_dropout) {
      if (dropout_rng == nullptr) throw UsageError("model: dropout enabled but no rng supplied");
      saved.drop_scale.assign(n_cols * cfg_.hidden_dim, 0.0);
    }
    const double keep = 1.0 - cfg_.dropout_p;
    for (std::size_t t = 0; t < n_cols; ++t) {
      double z = b2_;
      for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) {
        double pre = b1_[j];
        for (std::size_t i = 0; i < fan; ++i) pre += w1_(j, i) * saved.head_in(t, i);
        saved.hidden_pre(t, j) = pre;
        double h = std::max(pre, 0.0);
        if (use_dropout) {
          const double scale = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          saved.drop_scale[t * cfg_.hidden_dim + j] = scale;
          h *= scale;
        }
        z += w2_[j] * h;
      }
      saved.frame_logits[t] = z;
    }
    saved.segment_logit = log_mean_exp(saved.frame_logits, &saved.lme_softmax);
    saved.valid = true;
  }

  // d_segment: gradient w.r.t. the segment logit. Extra per-frame gradients
  // (same length as frame_logits) may be folded in via d_frames. Parameter
  // gradients accumulate into rec; the return value is d features.
  Matrix backward(double d_segment, const CnnSaved& saved, GradientRecord& rec,
                  const std::vector<double>* d_frames = nullptr) const {
    if (!saved.valid) throw UsageError("model backward without forward state");
    const std::size_t n_cols = saved.frame_logits.size(), fan = fan_in_head();
    std::vector<double> dz(n_cols);
    for (std::size_t t = 0; t < n_cols; ++t) {
      dz[t] = d_segment * saved.lme_softmax[t];
      if (d_frames != nullptr) dz[t] += (*d_frames)[t];
    }

    Matrix d_w1(w1_.rows, w1_.cols);
    std::vector<double> d_b1(cfg_.hidden_dim, 0.0), d_w2(cfg_.hidden_dim, 0.0);
    double d_b2 = 0.0;
    Matrix d_head_in(n_cols, fan);
    const bool used_dropout = !saved.drop_scale.empty();
    for (std::size_t t = 0; t < n_cols; ++t) {
      d_b2 += dz[t];
      for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) {
        const double pre = saved.hidden_pre(t, j);
        double h = std::max(pre, 0.0);
        double scale = 1.0;
        if (used_dropout) scale = saved.drop_scale[t * cfg_.hidden_dim + j];
        d_w2[j] += dz[t] * h * scale;
        double dh = dz[t] * w2_[j] * scale;
        if (pre <= 0.0) dh = 0.0;
        d_b1[j] += dh;
        for (std::size_t i = 0; i < fan; ++i) {
          d_w1(j, i) += dh * saved.head_in(t, i);
          d_head_in(t, i) += dh * w1_(j, i);
        }
      }
    }

    // un-flatten head gradient into the last pooled tensor
    const Tensor3& last = saved.blocks.back().pooled;
    Tensor3 d_cur(last.channels, last.height, last.width);
    for (std::size_t t = 0; t < n_cols; ++t)
      for (std::size_t c = 0; c < last.channels; ++c)
        for (std::size_t y = 0; y < last.height; ++y)
          d_cur.at(c, y, t) = d_head_in(t, c * last.height + y);

    std::vector<Matrix> d_weights;
    std::vector<std::vector<double>> d_biases;
    for (std::size_t i = saved.blocks.size(); i-- > 0;) {
      const ConvBlockSaved& bs = saved.blocks[i];
      Tensor3 d_act(bs.preact.channels, bs.preact.height, bs.preact.width);
      unpool_freq2(d_cur, bs.argmax, d_act);
      for (std::size_t k = 0; k < d_act.data.size(); ++k)
        if (bs.preact.data[k] <= 0.0) d_act.data[k] = 0.0;
      Matrix dw(weights_[i].rows, weights_[i].cols);
      std::vector<double> db(biases_[i].size(), 0.0);
      Tensor3 d_in;
      conv2d_backward(bs.input, weights_[i], cfg_.conv_blocks[i], d_act, dw, db, d_in);
      d_weights.push_back(std::move(dw));
      d_biases.push_back(std::move(db));
      d_cur = std::move(d_in);
    }

    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const std::string base = "model.conv" + std::to_string(i + 1);
      const Matrix& dw = d_weights[weights_.size() - 1 - i];
      const std::vector<double>& db = d_biases[weights_.size() - 1 - i];
      record_add(rec, base + ".weight", dw.data.data(), dw.data.size());
      record_add(rec, base + ".bias", db.data(), db.size());
    }
    record_add(rec, "model.head.w1", d_w1.data.data(), d_w1.data.size());
    record_add(rec, "model.head.b1", d_b1.data(), d_b1.size());
    record_add(rec, "model.head.w2", d_w2.data(), d_w2.size());
    record_add(rec, "model.head.b2", &d_b2, 1);

    Matrix d_features(d_cur.height, d_cur.width);
    d_features.data = d_cur.data;
    return d_features;
  }

 private:
  static Tensor3 conv2d(const Tensor3& in, const Matrix& w, const std::vector<double>& b,
                        const ConvBlockConfig& bc) {
    const std::size_t ph = bc.kernel_h / 2, pw = bc.kernel_w / 2, s = bc.stride;
    const std::size_t oh = (in.height - 1) / s + 1, ow = (in.width - 1) / s + 1;
    Tensor3 out(bc.out_channels, oh, ow);
    for (std::size_t co = 0; co < bc.out_channels; ++co)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < in.channels; ++ci)
            for (std::size_t dy = 0; dy < bc.kernel_h; ++dy) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(y * s + dy) - static_cast<std::ptrdiff_t>(ph);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
              for (std::size_t dx = 0; dx < bc.kernel_w; ++dx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(x * s + dx) - static_cast<std::ptrdiff_t>(pw);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                acc += w(co, (ci * bc.kernel_h + dy) * bc.kernel_w + dx) *
                       in.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
          out.at(co, y, x) = acc;
        }
    return out;
  }

  static void conv2d_backward(const Tensor3& in, const Matrix& w, const ConvBlockConfig& bc,
                              const Tensor3& d_out, Matrix& d_w, std::vector<double>& d_b,
                              Tensor3& d_in) {
    const std::size_t ph = bc.kernel_h / 2, pw = bc.kernel_w / 2, s = bc.stride;
    d_in = Tensor3(in.channels, in.height, in.width);
    for (std::size_t co = 0; co < bc.out_channels; ++co)
      for (std::size_t y = 0; y < d_out.height; ++y)
        for (std::size_t x = 0; x < d_out.width; ++x) {
          const double g = d_out.at(co, y, x);
          if (g == 0.0) continue;  // exact zero: ReLU/pool cut, nothing flows
          d_b[co] += g;
          for (std::size_t ci = 0; ci < in.channels; ++ci)
            for (std::size_t dy = 0; dy < bc.kernel_h; ++dy) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(y * s + dy) - static_cast<std::ptrdiff_t>(ph);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
              for (std::size_t dx = 0; dx < bc.kernel_w; ++dx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(x * s + dx) - static_cast<std::ptrdiff_t>(pw);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                const std::size_t widx = (ci * bc.kernel_h + dy) * bc.kernel_w + dx;
                d_w(co, widx) +=
                    g * in.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                d_in.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                    g * w(co, widx);
              }
            }
        }
  }

  // 2x1 max pool: halve the frequency axis, keep every time column. An odd
  // trailing row is dropped, matching floor division of the height.
  static void pool_freq2(const Tensor3& in, Tensor3& out, std::vector<std::uint8_t>& argmax) {
    out = Tensor3(in.channels, in.height / 2, in.width);
    argmax.assign(out.data.size(), 0);
    for (std::size_t c = 0; c < out.channels; ++c)
      for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x) {
          const double a = in.at(c, 2 * y, x), b = in.at(c, 2 * y + 1, x);
          const std::size_t idx = (c * out.height + y) * out.width + x;
          if (b > a) {
            out.data[idx] = b;
            argmax[idx] = 1;
          } else {
            out.data[idx] = a;
          }
        }
  }

  static void unpool_freq2(const Tensor3& d_pooled, const std::vector<std::uint8_t>& argmax,
                           Tensor3& d_act) {
    for (std::size_t c = 0; c < d_pooled.channels; ++c)
      for (std::size_t y = 0; y < d_pooled.height; ++y)
        for (std::size_t x = 0; x < d_pooled.width; ++x) {
          const std::size_t idx = (c * d_pooled.height + y) * d_pooled.width + x;
          d_act.at(c, 2 * y + argmax[idx], x) += d_pooled.data[idx];
        }
  }

  TinyCnnConfig cfg_;
  std::size_t in_height_ = 0;
  std::size_t out_channels_ = 0;
  std::size_t out_height_ = 0;
  std::vector<Matrix> weights_;
  std::vector<std::vector<double>> biases_;
  Matrix w1_;
  std::vector<double> b1_;
  std::vector<double> w2_;
  double b2_ = 0.0;
};

}  // namespace buzzline
