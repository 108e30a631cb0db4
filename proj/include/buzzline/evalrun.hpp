// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "buzzline/config.hpp"
#include "buzzline/infer.hpp"
#include "buzzline/log.hpp"
#include "buzzline/manifest.hpp"
#include "buzzline/psds.hpp"
#include "buzzline/train.hpp"
#include "buzzline/wav.hpp"

namespace buzzline {

inline double manifest_duration_h(const Manifest& manifest, const std::string& split = "") {
  double seconds = 0.0;
  for (const ManifestEntry& e : manifest.entries) {
    if (!split.empty() && e.split != split) continue;
    seconds += probe_wav(manifest.resolve(e.file)).duration_s();
  }
  return seconds / 3600.0;
}

struct EvalOutput {
  double psds = 0.0;
  std::vector<OperatingPoint> points;
  std::size_t n_ground_truth = 0;
  double dataset_duration_h = 0.0;
};

// Score a detections file against ground truth. Detections are grouped by
// (threshold, clip); thresholds come from the file itself, falling back to
// the configured sweep (all-empty operating points) when the file is empty.
inline EvalOutput evaluate_detections(const std::vector<Detection>& detections,
                                      const Manifest& ground_truth, const PsdsConfig& cfg,
                                      const std::vector<double>& fallback_thresholds) {
  cfg.validate();
  std::map<std::string, const ManifestEntry*> by_file;
  std::size_t n_gt = 0;
  for (const ManifestEntry& e : ground_truth.entries) {
    by_file[e.file] = &e;
    n_gt += e.events.size();
  }
  for (const Detection& d : detections)
    if (by_file.find(d.clip_id) == by_file.end())
      throw DataError("eval: detection references clip '" + d.clip_id +
                      "' absent from the manifest");

  std::set<double> threshold_set;
  for (const Detection& d : detections) threshold_set.insert(d.threshold);
  std::vector<double> thresholds(threshold_set.begin(), threshold_set.end());
  if (thresholds.empty()) thresholds = fallback_thresholds;
  if (thresholds.empty()) throw UsageError("eval: no thresholds to score");

  // (threshold index, file) -> events
  std::map<std::pair<std::size_t, std::string>, std::vector<LabeledEvent>> grouped;
  for (const Detection& d : detections) {
    const std::size_t ti = static_cast<std::size_t>(
        std::lower_bound(thresholds.begin(), thresholds.end(), d.threshold) -
        thresholds.begin());
    grouped[{ti, d.clip_id}].push_back(d.event);
  }

  std::vector<ThresholdResult> results;
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    ThresholdResult tr;
    tr.threshold = thresholds[ti];
    for (const auto& [file, entry] : by_file) {
      auto it = grouped.find({ti, file});
      static const std::vector<LabeledEvent> kNone;
      const std::vector<LabeledEvent>& dets = it != grouped.end() ? it->second : kNone;
      tr.counts += match_events(dets, entry->events, cfg);
    }
    results.push_back(std::move(tr));
  }

  EvalOutput out;
  out.n_ground_truth = n_gt;
  out.dataset_duration_h = cfg.dataset_duration_h;
  out.points = psd_roc(results, n_gt, cfg);
  out.psds = psds_score(out.points, cfg);
  return out;
}

inline void write_metrics_json(const std::string& path, const EvalOutput& eval) {
  Json j;
  j["psds"] = eval.psds;
  j["n_ground_truth"] = eval.n_ground_truth;
  j["dataset_duration_h"] = eval.dataset_duration_h;
  Json points = Json::array();
  for (const OperatingPoint& p : eval.points)
    points.push_back({{"threshold", p.threshold}, {"tpr", p.tpr}, {"efpr", p.efpr}});
  j["points"] = std::move(points);
  save_json_file(path, j);
}

inline void write_roc_csv(const std::string& path, const std::vector<OperatingPoint>& points) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "threshold,tpr,efpr\n";
  char line[128];
  for (const OperatingPoint& p : points) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", p.threshold, p.tpr, p.efpr);
    out << line;
  }
}

// ---------------------------------------------------------------------------
// Train -> infer -> eval for one config (the body of cmd_train + cmd_ablate)
// ---------------------------------------------------------------------------

struct PipelineRunResult {
  TrainResult train;
  EvalOutput eval;
  bool evaluated = false;
};

// Trains on the manifest's train split and, when a test split exists, scores
// the trained model on it. Artifacts land under run_dir.
inline PipelineRunResult run_training_pipeline(RunConfig cfg, const std::string& run_dir) {
  if (cfg.augment.mix_enabled && cfg.augment.mix.noise_dir.empty()) {
    const std::string candidate = cfg.paths.corpus_dir + "/noise";
    if (std::filesystem::is_directory(candidate)) cfg.augment.mix.noise_dir = candidate;
  }
  cfg.validate();
  Manifest manifest = load_manifest(cfg.paths.corpus_dir + "/manifest.csv");
  std::vector<TrainItem> train_items =
      build_dataset(manifest, "train", cfg.corpus.clip_duration_s,
                    cfg.frontend.stft.sample_rate, cfg.train.min_event_overlap_s);

  PipelineRunResult out;
  Trainer trainer(cfg);
  out.train = trainer.run(train_items, run_dir);

  Manifest test;
  test.base_dir = manifest.base_dir;
  test.entries = manifest.split("test");
  if (!test.entries.empty()) {
    WindowedScorer scorer(trainer.frontend(), trainer.model(), cfg.detect,
                          cfg.corpus.clip_duration_s);
    std::vector<Detection> detections;
    for (const ManifestEntry& entry : test.entries) {
      const AudioClip clip = load_wav(test.resolve(entry.file));
      if (clip.sample_rate != cfg.frontend.stft.sample_rate)
        throw ConfigError("eval: " + entry.file + " sample rate mismatch");
      for (Detection& d : scorer.detections(clip, entry.file))
        detections.push_back(std::move(d));
    }
    write_detections_jsonl(run_dir + "/detections_test.jsonl", detections);

    PsdsConfig pcfg = cfg.psds;
    if (pcfg.dataset_duration_h <= 0.0) pcfg.dataset_duration_h = manifest_duration_h(test);
    out.eval = evaluate_detections(detections, test, pcfg, cfg.detect.thresholds);
    out.evaluated = true;
    write_metrics_json(run_dir + "/metrics_test.json", out.eval);
    write_roc_csv(run_dir + "/roc_test.csv", out.eval.points);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationArm {
  std::string name;
  RunConfig cfg;
};

inline std::vector<AblationArm> ablation_arms(const RunConfig& base) {
  std::vector<AblationArm> arms;
  arms.push_back({"full", base});
  {
    RunConfig c = base;
    c.augment.mask_enabled = false;
    arms.push_back({"no_masking", c});
  }
  {
    RunConfig c = base;
    c.augment.mix_enabled = false;
    arms.push_back({"no_mixing", c});
  }
  {
    RunConfig c = base;
    c.frontend.compression = Compression::kLog;
    arms.push_back({"log_compression", c});
  }
  {
    RunConfig c = base;
    c.frontend.trainable_kernels = false;
    arms.push_back({"frozen_kernels", c});
  }
  return arms;
}

struct AblationArmResult {
  std::string name;
  bool ok = false;
  double psds = 0.0;
  double final_eval_acc = 0.0;
  std::string error;
};

// Same seed per arm; a failing arm is reported as failed without stopping the
// others.
inline std::vector<AblationArmResult> run_ablation(const RunConfig& base,
                                                   const std::string& work_dir) {
  std::vector<AblationArmResult> results;
  for (const AblationArm& arm : ablation_arms(base)) {
    AblationArmResult r;
    r.name = arm.name;
    try {
      const std::string arm_dir = work_dir + "/" + arm.name;
      PipelineRunResult run = run_training_pipeline(arm.cfg, arm_dir);
      if (!run.evaluated)
        throw DataError("ablation: manifest has no test split to score");
      r.ok = true;
      r.psds = run.eval.psds;
      r.final_eval_acc = run.train.final_eval_acc;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
      log::error("ablation arm " + arm.name + " failed: " + r.error);
    }
    results.push_back(std::move(r));
  }
  return results;
}

inline void write_ablation_csv(const std::string& path,
                               const std::vector<AblationArmResult>& results) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "arm,status,psds,final_train_acc,error\n";
  for (const AblationArmResult& r : results) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    char line[512];
    if (r.ok)
      std::snprintf(line, sizeof(line), "%s,ok,%.17g,%.17g,\n", r.name.c_str(), r.psds,
                    r.final_eval_acc);
    else
      std::snprintf(line, sizeof(line), "%s,failed,,,%s\n", r.name.c_str(), err.c_str());
    out << line;
  }
}

}  // namespace buzzline
