// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/params.hpp"

namespace buzzline {

enum class OptimizerKind { kSgdMomentum, kAdam };

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd_momentum") return OptimizerKind::kSgdMomentum;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer: " + s);
}

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::kSgdMomentum ? "sgd_momentum" : "adam";
}

struct OptimConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 3e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("optimizer: learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum in [0,1)");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("optimizer: betas must be in [0,1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
  }
};

// Single-writer parameter updates. State buffers are keyed by parameter name
// so checkpoint round-trips do not depend on registration order.
class Optimizer {
 public:
  explicit Optimizer(const OptimConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return t_; }

  void step(ParamStore& store, const GradientRecord& grads) {
    store.check_record(grads);
    for (const auto& [name, g] : grads)
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
          throw NumericError("non-finite gradient in " + name + " at index " +
                             std::to_string(i));
    ++t_;
    for (Param& p : store.all()) {
      if (!p.trainable) continue;
      auto it = grads.find(p.name);
      if (it == grads.end()) continue;
      const std::vector<double>& g = it->second;
      const double lr = cfg_.learning_rate * p.lr_scale;
      if (cfg_.kind == OptimizerKind::kSgdMomentum) {
        std::vector<double>& vel = state(m_, p);
        for (std::size_t i = 0; i < p.size(); ++i) {
          vel[i] = cfg_.momentum * vel[i] + g[i];
          p.data[i] -= lr * vel[i];
        }
      } else {
        std::vector<double>& m = state(m_, p);
        std::vector<double>& v = state(v_, p);
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
          p.data[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        }
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.data[i] < p.domain_lo) p.data[i] = p.domain_lo;
        if (p.data[i] > p.domain_hi) p.data[i] = p.domain_hi;
        if (!std::isfinite(p.data[i]))
          throw NumericError("non-finite parameter after update: " + p.name);
      }
    }
  }

  // flat state dump for checkpointing: name -> {m[, v]}
  std::map<std::string, std::vector<std::vector<double>>> export_state() const {
    std::map<std::string, std::vector<std::vector<double>>> out;
    for (const auto& [name, buf] : m_) out[name].push_back(buf);
    for (const auto& [name, buf] : v_) out[name].push_back(buf);
    return out;
  }

  void import_state(const std::map<std::string, std::vector<std::vector<double>>>& s,
                    std::int64_t step_count) {
    m_.clear();
    v_.clear();
    for (const auto& [name, bufs] : s) {
      if (bufs.empty()) continue;
      m_[name] = bufs[0];
      if (bufs.size() > 1) v_[name] = bufs[1];
    }
    t_ = step_count;
  }

 private:
  std::vector<double>& state(std::map<std::string, std::vector<double>>& slot, const Param& p) {
    auto [it, inserted] = slot.try_emplace(p.name);
    if (inserted) it->second.assign(p.size(), 0.0);
    if (it->second.size() != p.size())
      throw UsageError("optimizer state size mismatch for " + p.name);
    return it->second;
  }

  OptimConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

}  // namespace buzzline
