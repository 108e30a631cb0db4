// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "buzzline/common.hpp"

namespace buzzline {

// Parameter-id -> gradient buffer, same length as the parameter. std::map
// keeps iteration order deterministic.
using GradientRecord = std::map<std::string, std::vector<double>>;

inline void record_add(GradientRecord& rec, const std::string& name, const double* g,
                       std::size_t n) {
  auto& buf = rec[name];
  if (buf.empty()) buf.assign(n, 0.0);
  if (buf.size() != n) throw UsageError("GradientRecord: conflicting sizes for " + name);
  for (std::size_t i = 0; i < n; ++i) buf[i] += g[i];
}

inline void record_scale(GradientRecord& rec, double factor) {
  for (auto& [name, buf] : rec)
    for (double& v : buf) v *= factor;
}

// Non-owning view of a registered parameter buffer. Layers own their weights;
// the store is the flat namespace the optimizer, checkpointing and gradient
// checking operate on.
struct Param {
  std::string name;
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool trainable = true;
  double lr_scale = 1.0;
  double domain_lo = -std::numeric_limits<double>::infinity();
  double domain_hi = std::numeric_limits<double>::infinity();

  std::size_t size() const { return rows * cols; }
};

class ParamStore {
 public:
  void add(Param p) {
    if (p.data == nullptr || p.size() == 0) throw UsageError("ParamStore: empty parameter");
    if (find(p.name) != nullptr) throw UsageError("ParamStore: duplicate name " + p.name);
    params_.push_back(std::move(p));
    std::sort(params_.begin(), params_.end(),
              [](const Param& a, const Param& b) { return a.name < b.name; });
  }

  Param* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const Param* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  // Every key must resolve to a registered parameter with the exact size.
  void check_record(const GradientRecord& rec) const {
    for (const auto& [name, buf] : rec) {
      const Param* p = find(name);
      if (p == nullptr) throw UsageError("GradientRecord: unknown parameter " + name);
      if (buf.size() != p->size())
        throw UsageError("GradientRecord: size mismatch for " + name + ": " +
                         std::to_string(buf.size()) + " vs " + std::to_string(p->size()));
    }
  }

 private:
  std::vector<Param> params_;
};

}  // namespace buzzline
