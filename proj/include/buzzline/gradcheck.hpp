// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/params.hpp"
#include "buzzline/rng.hpp"

namespace buzzline {

struct GradCheckParamReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckParamReport> params;
  double tolerance = 1e-3;
  bool all_pass = true;

  std::string summary() const {
    std::string s;
    for (const auto& p : params) {
      char line[256];
      std::snprintf(line, sizeof(line), "%-28s checked=%3zu max_rel_err=%.3e %s\n",
                    p.name.c_str(), p.checked, p.max_rel_err, p.pass ? "ok" : "FAIL");
      s += line;
    }
    return s;
  }
};

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  double abs_floor = 1e-8;
  std::size_t max_coords = 64;
};

// Central finite differences against an analytic GradientRecord. loss_fn must
// recompute the full (deterministic) pipeline loss from current parameter
// values; parameters are perturbed in place and restored.
inline GradCheckReport grad_check(ParamStore& store, const GradientRecord& analytic,
                                  const std::function<double()>& loss_fn,
                                  const GradCheckOptions& opt, Rng& rng) {
  store.check_record(analytic);
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (Param& p : store.all()) {
    if (!p.trainable) continue;
    auto it = analytic.find(p.name);
    if (it == analytic.end()) continue;
    const std::vector<double>& g = it->second;

    std::vector<std::size_t> coords(p.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > opt.max_coords) {
      // partial Fisher-Yates: first max_coords entries become the sample
      for (std::size_t i = 0; i < opt.max_coords; ++i) {
        const std::size_t j = rng.uniform_int(i, coords.size() - 1);
        std::swap(coords[i], coords[j]);
      }
      coords.resize(opt.max_coords);
    }

    GradCheckParamReport pr;
    pr.name = p.name;
    pr.checked = coords.size();
    for (std::size_t idx : coords) {
      const double saved = p.data[idx];
      p.data[idx] = saved + opt.step;
      const double lp = loss_fn();
      p.data[idx] = saved - opt.step;
      const double lm = loss_fn();
      p.data[idx] = saved;
      const double fd = (lp - lm) / (2.0 * opt.step);
      const double denom = std::max({std::abs(fd), std::abs(g[idx]), opt.abs_floor});
      const double rel = std::abs(fd - g[idx]) / denom;
      if (rel > pr.max_rel_err) {
        pr.max_rel_err = rel;
        pr.worst_index = idx;
        pr.analytic = g[idx];
        pr.numeric = fd;
      }
    }
    pr.pass = pr.max_rel_err <= opt.tolerance;
    report.all_pass = report.all_pass && pr.pass;
    report.params.push_back(std::move(pr));
  }
  return report;
}

}  // namespace buzzline
