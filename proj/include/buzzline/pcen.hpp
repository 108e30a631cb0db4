// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>

#include "buzzline/common.hpp"
#include "buzzline/matrix.hpp"

namespace buzzline {

// Per-channel energy normalization:
//   M[f][t] = (1-s) M[f][t-1] + s E[f][t],  M[f][0] = E[f][0]
//   out     = (E / (eps + M)^alpha + delta)^r - delta^r
// A first-order IIR smoother tracks slow energy; dividing by its alpha power
// is the automatic gain control, and the r-root is the compression. All of
// alpha, delta, r (and optionally s) are trainable; backward is analytic,
// including backpropagation through the smoother recursion.
struct PcenParams {
  double alpha = 0.98;
  double delta = 2.0;
  double r = 0.5;
  double s = 0.025;
  double epsilon = 1e-6;
  bool train_alpha = true;
  bool train_delta = true;
  bool train_r = true;
  bool train_s = false;

  void validate() const {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("pcen: require 0 < s <= 1");
    if (!(epsilon > 0.0)) throw ConfigError("pcen: require epsilon > 0");
    if (!(delta >= 0.0)) throw ConfigError("pcen: require delta >= 0");
    if (!(r > 0.0)) throw ConfigError("pcen: require r > 0");
    if (!(alpha >= 0.0)) throw ConfigError("pcen: require alpha >= 0");
  }
};

struct PcenSaved {
  Matrix energy;    // E
  Matrix smoother;  // M
  Matrix gain;      // G = E / (eps + M)^alpha
  PcenParams params;
  bool valid = false;
};

inline Matrix pcen_forward(const Matrix& mel, const PcenParams& params,
                           PcenSaved* saved = nullptr) {
  params.validate();
  for (double v : mel.data)
    if (v < 0.0) throw DataError("pcen: negative input energy");

  const std::size_t channels = mel.rows;
  const std::size_t frames = mel.cols;
  Matrix smoother(channels, frames);
  for (std::size_t f = 0; f < channels; ++f) {
    const double* e = mel.row(f);
    double* m = smoother.row(f);
    m[0] = e[0];
    for (std::size_t t = 1; t < frames; ++t)
      m[t] = (1.0 - params.s) * m[t - 1] + params.s * e[t];
  }

  Matrix gain(channels, frames);
  Matrix out(channels, frames);
  const double delta_r = std::pow(params.delta, params.r);
  for (std::size_t i = 0; i < mel.data.size(); ++i) {
    const double g =
        mel.data[i] * std::pow(params.epsilon + smoother.data[i], -params.alpha);
    gain.data[i] = g;
    out.data[i] = std::pow(g + params.delta, params.r) - delta_r;
  }

  if (saved != nullptr) {
    saved->energy = mel;
    saved->smoother = std::move(smoother);
    saved->gain = std::move(gain);
    saved->params = params;
    saved->valid = true;
  }
  return out;
}

struct PcenGrads {
  double d_alpha = 0.0;
  double d_delta = 0.0;
  double d_r = 0.0;
  double d_s = 0.0;
  Matrix d_input;
};

// Analytic partials. The smoother chain is unrolled backward per channel:
// lambda[t] carries dL/dM[t], with lambda[t] = c[t] + (1-s) lambda[t+1].
inline PcenGrads pcen_backward(const Matrix& grad_out, const PcenSaved& saved) {
  if (!saved.valid) throw UsageError("pcen_backward: no saved forward state");
  if (!grad_out.same_shape(saved.energy))
    throw UsageError("pcen_backward: grad shape mismatch");

  const PcenParams& p = saved.params;
  const std::size_t channels = saved.energy.rows;
  const std::size_t frames = saved.energy.cols;

  PcenGrads grads;
  grads.d_input = Matrix(channels, frames);

  const double delta_r = std::pow(p.delta, p.r);
  const double log_delta = p.delta > 0.0 ? std::log(p.delta) : 0.0;

  for (std::size_t f = 0; f < channels; ++f) {
    const double* e = saved.energy.row(f);
    const double* m = saved.smoother.row(f);
    const double* g = saved.gain.row(f);
    const double* go = grad_out.row(f);
    double* din = grads.d_input.row(f);

    // Per-frame chain pieces that do not touch the recursion.
    // dout/dG, and the direct parameter partials.
    double lambda_next = 0.0;  // dL/dM[t+1], propagated backward
    for (std::size_t t = frames; t-- > 0;) {
      const double base = g[t] + p.delta;
      const double dout_dg = base > 0.0 ? p.r * std::pow(base, p.r - 1.0) : 0.0;
      const double em = p.epsilon + m[t];
      const double a_pow = std::pow(em, -p.alpha);  // (eps+M)^-alpha

      const double upstream = go[t] * dout_dg;

      grads.d_alpha += -upstream * g[t] * std::log(em);
      grads.d_delta += go[t] * (dout_dg - (p.delta > 0.0 ? p.r * std::pow(p.delta, p.r - 1.0)
                                                         : (p.r == 1.0 ? 1.0 : 0.0)));
      grads.d_r += go[t] * ((base > 0.0 ? std::pow(base, p.r) * std::log(base) : 0.0) -
                            delta_r * log_delta);

      // dL/dM[t] = direct via gain + carry from M[t+1].
      const double c_t = upstream * (-p.alpha * g[t] / em);
      const double lambda_t = c_t + (1.0 - p.s) * lambda_next;

      if (t == 0) {
        // M[0] = E[0]: the smoother head feeds the first input directly.
        din[0] = upstream * a_pow + lambda_t;
      } else {
        din[t] = upstream * a_pow + p.s * lambda_t;
        grads.d_s += lambda_t * (e[t] - m[t - 1]);
      }
      lambda_next = lambda_t;
    }
  }
  return grads;
}

}  // namespace buzzline
