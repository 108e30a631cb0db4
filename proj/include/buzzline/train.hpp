// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "buzzline/augment.hpp"
#include "buzzline/checkpoint.hpp"
#include "buzzline/config.hpp"
#include "buzzline/corpus.hpp"
#include "buzzline/frontend.hpp"
#include "buzzline/gradcheck.hpp"
#include "buzzline/log.hpp"
#include "buzzline/manifest.hpp"
#include "buzzline/nn.hpp"
#include "buzzline/optim.hpp"
#include "buzzline/wav.hpp"

namespace buzzline {

struct TrainItem {
  AudioClip segment;
  double label = 0.0;
  std::string source_file;
  std::size_t index = 0;  // stable dataset index, keys the augmentation stream
};

// Fixed-length labeled segments for one manifest split. A segment is positive
// when ground-truth events overlap it by at least min_event_overlap_s.
inline std::vector<TrainItem> build_dataset(const Manifest& manifest, const std::string& split,
                                            double segment_duration_s, int expected_rate,
                                            double min_event_overlap_s) {
  std::vector<TrainItem> items;
  SegmentSpec spec;
  spec.duration_s = segment_duration_s;
  for (const ManifestEntry& entry : manifest.entries) {
    if (!split.empty() && entry.split != split) continue;
    AudioClip clip = load_wav(manifest.resolve(entry.file));
    if (clip.sample_rate != expected_rate)
      throw ConfigError("dataset: " + entry.file + " has sample rate " +
                        std::to_string(clip.sample_rate) + ", config expects " +
                        std::to_string(expected_rate));
    const std::vector<AudioClip> segs = segment(clip, spec);
    for (std::size_t s = 0; s < segs.size(); ++s) {
      TrainItem item;
      item.segment = segs[s];
      item.source_file = entry.file;
      item.index = items.size();
      const double t0 = static_cast<double>(s) * segment_duration_s;
      const double t1 = t0 + segment_duration_s;
      double overlap = 0.0;
      for (const LabeledEvent& ev : entry.events)
        overlap += std::max(0.0, std::min(ev.offset_s, t1) - std::max(ev.onset_s, t0));
      item.label = overlap >= min_event_overlap_s ? 1.0 : 0.0;
      items.push_back(std::move(item));
    }
  }
  return items;
}

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean augmented-pass BCE
  double train_acc = 0.0;  // augmented-pass accuracy
  double eval_acc = 0.0;   // clean eval-mode accuracy on the same items
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  double final_eval_acc = 0.0;
  std::string final_checkpoint;
  std::string best_checkpoint;
};

// Owns the trainable pipeline for one run. Augmentation randomness is keyed
// by (seed, epoch, item index), so results do not depend on batching order or
// worker scheduling.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg)
      : cfg_(cfg),
        frontend_(cfg.frontend),
        init_rng_(Rng::derive(cfg.seed, "model-init")),
        model_(cfg.model, cfg.frontend.n_mels, init_rng_),
        optimizer_(cfg.train.optim) {
    cfg_.validate();
    frontend_.register_params(store_, cfg_.train.lr_pcen_scale);
    model_.register_params(store_);
    if (cfg_.augment.mix_enabled && cfg_.augment.mix.probability > 0.0 &&
        !cfg_.augment.mix.noise_dir.empty())
      noise_ = NoiseLibrary::from_dir(cfg_.augment.mix.noise_dir,
                                      cfg_.frontend.stft.sample_rate);
  }

  Frontend& frontend() { return frontend_; }
  TinyCnn& model() { return model_; }
  ParamStore& store() { return store_; }
  Optimizer& optimizer() { return optimizer_; }
  const RunConfig& config() const { return cfg_; }

  void restore(const LoadedCheckpoint& ckpt) {
    restore_params(store_, ckpt);
    frontend_.on_params_updated();
    if (ckpt.has_optimizer) optimizer_.import_state(ckpt.optimizer_state, ckpt.optimizer_steps);
  }

  // one augmented forward for one item; returns the segment logit and queues
  // the saved state for backward_batch
  double train_item(const TrainItem& item, std::size_t epoch) {
    Rng rng = item_rng(epoch, item.index);
    AudioClip seg = item.segment;
    if (cfg_.augment.mix_enabled && noise_.size() > 0) {
      auto noise = sample_noise(cfg_.augment.mix, noise_, seg.samples.size(), rng);
      if (noise.has_value()) {
        const double snr =
            rng.uniform(cfg_.augment.mix.snr_db_lo, cfg_.augment.mix.snr_db_hi);
        seg = mix(seg, *noise, snr);
      }
    }
    FrontendSaved fsaved;
    Matrix features = frontend_.forward(seg, &fsaved);
    MaskPlan plan;
    if (cfg_.augment.mask_enabled)
      features = apply_masks(features, cfg_.augment.mask, rng, &plan);
    CnnSaved msaved;
    model_.forward(features, /*train=*/true, &rng, msaved);

    pending_.push_back({std::move(fsaved), std::move(msaved), std::move(plan)});
    return pending_.back().model.segment_logit;
  }

  // backward for the batch gathered since the last flush
  void backward_batch(const std::vector<double>& loss_grads, GradientRecord& rec) {
    if (loss_grads.size() != pending_.size())
      throw UsageError("trainer: loss grad count != pending forward count");
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      Matrix d_features = model_.backward(loss_grads[i], pending_[i].model, rec);
      if (cfg_.augment.mask_enabled) mask_cut_gradient(d_features, pending_[i].plan);
      frontend_.backward(d_features, pending_[i].frontend, rec);
    }
    pending_.clear();
  }

  void apply_step(const GradientRecord& rec) {
    optimizer_.step(store_, rec);
    frontend_.on_params_updated();
  }

  // clean forward (no augmentation, eval mode) -> segment probability
  double predict(const AudioClip& seg) {
    CnnSaved saved;
    Matrix features = frontend_.forward(seg);
    model_.forward(features, /*train=*/false, nullptr, saved);
    return sigmoid(saved.segment_logit);
  }

  TrainResult run(const std::vector<TrainItem>& items, const std::string& run_dir) {
    if (items.empty()) throw DataError("train: empty dataset");
    std::filesystem::create_directories(run_dir);
    const std::string log_path = run_dir + "/train_log.csv";
    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write " + log_path);
    log << "epoch,loss,train_acc,eval_acc\n";

    TrainResult result;
    result.final_checkpoint = run_dir + "/checkpoint_final.json";
    result.best_checkpoint = run_dir + "/checkpoint_best.json";
    Rng ckpt_rng = Rng::derive(cfg_.seed, "post-train");
    double best_acc = -1.0;

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg_.train.epochs; ++epoch) {
      Rng shuffle_rng = Rng::derive(cfg_.seed, "shuffle:" + std::to_string(epoch));
      for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(
            shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
      }

      double epoch_loss = 0.0;
      std::size_t correct = 0;
      for (std::size_t b = 0; b < order.size(); b += cfg_.train.batch_size) {
        const std::size_t e = std::min(order.size(), b + cfg_.train.batch_size);
        std::vector<double> logits, labels;
        for (std::size_t k = b; k < e; ++k) {
          const TrainItem& item = items[order[k]];
          logits.push_back(train_item(item, epoch));
          labels.push_back(item.label);
        }
        GradientRecord rec;
        BceResult bce = bce_loss(logits, labels);
        if (!std::isfinite(bce.loss))
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(b / cfg_.train.batch_size));
        backward_batch(bce.grad, rec);
        apply_step(rec);
        epoch_loss += bce.loss * static_cast<double>(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k)
          if ((sigmoid(logits[k]) >= 0.5) == (labels[k] >= 0.5)) ++correct;
      }

      EpochLog el;
      el.epoch = epoch;
      el.loss = epoch_loss / static_cast<double>(items.size());
      el.train_acc = static_cast<double>(correct) / static_cast<double>(items.size());
      std::size_t eval_correct = 0;
      for (const TrainItem& item : items)
        if ((predict(item.segment) >= 0.5) == (item.label >= 0.5)) ++eval_correct;
      el.eval_acc = static_cast<double>(eval_correct) / static_cast<double>(items.size());
      result.epochs.push_back(el);

      char line[160];
      std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g\n", el.epoch, el.loss,
                    el.train_acc, el.eval_acc);
      log << line;
      log::info("epoch " + std::to_string(epoch) + " loss " +
                        std::to_string(el.loss) + " acc " + std::to_string(el.eval_acc));
      if (el.eval_acc > best_acc) {
        best_acc = el.eval_acc;
        save_checkpoint(result.best_checkpoint, store_, cfg_,
                        static_cast<std::int64_t>(epoch) + 1, ckpt_rng, &optimizer_);
      }
    }

    result.final_eval_acc = result.epochs.empty() ? 0.0 : result.epochs.back().eval_acc;
    save_checkpoint(result.final_checkpoint, store_, cfg_,
                    static_cast<std::int64_t>(cfg_.train.epochs), ckpt_rng, &optimizer_);
    if (cfg_.train.epochs == 0)
      save_checkpoint(result.best_checkpoint, store_, cfg_, 0, ckpt_rng, &optimizer_);
    return result;
  }

 private:
  struct PendingItem {
    FrontendSaved frontend;
    CnnSaved model;
    MaskPlan plan;
  };

  Rng item_rng(std::size_t epoch, std::size_t index) const {
    return Rng::derive(cfg_.seed,
                       "aug:" + std::to_string(epoch) + ":" + std::to_string(index));
  }

  RunConfig cfg_;
  Frontend frontend_;
  Rng init_rng_;
  TinyCnn model_;
  ParamStore store_;
  Optimizer optimizer_;
  NoiseLibrary noise_;
  std::vector<PendingItem> pending_;
};

}  // namespace buzzline
