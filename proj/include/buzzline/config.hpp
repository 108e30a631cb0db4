// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "buzzline/augment.hpp"
#include "buzzline/common.hpp"
#include "buzzline/corpus.hpp"
#include "buzzline/detect.hpp"
#include "buzzline/frontend.hpp"
#include "buzzline/nn.hpp"
#include "buzzline/optim.hpp"
#include "buzzline/psds.hpp"

namespace buzzline {

using Json = nlohmann::ordered_json;

struct TrainConfig {
  OptimConfig optim;
  std::size_t batch_size = 16;
  std::size_t epochs = 15;
  double lr_pcen_scale = 0.1;      // front-end parameters train slower
  double min_event_overlap_s = 0.3;  // segment is positive if GT overlap >= this

  void validate() const {
    optim.validate();
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (min_event_overlap_s < 0.0)
      throw ConfigError("train: min_event_overlap_s must be >= 0");
    if (!(lr_pcen_scale > 0.0)) throw ConfigError("train: lr_pcen_scale must be > 0");
  }
};

struct AugmentConfig {
  bool mix_enabled = true;
  MixSpec mix;
  bool mask_enabled = true;
  MaskSpec mask;

  void validate() const { mix.validate(); }
};

struct PathsConfig {
  std::string corpus_dir = "corpus";
  std::string run_dir = "runs/default";
};

struct RunConfig {
  std::uint64_t seed = 1234;
  SynthConfig corpus;
  FrontendConfig frontend;
  AugmentConfig augment;
  TinyCnnConfig model;
  TrainConfig train;
  DetectConfig detect;
  PsdsConfig psds;  // dataset_duration_h 0 -> derived from the WAVs at eval time
  PathsConfig paths;

  void validate() const {
    corpus.validate();
    frontend.validate();
    augment.validate();
    model.validate();
    train.validate();
    detect.validate();
    if (psds.dtc_threshold < 0.0 || psds.dtc_threshold > 1.0 || psds.gtc_threshold < 0.0 ||
        psds.gtc_threshold > 1.0)
      throw ConfigError("psds: tolerance thresholds must lie in [0,1]");
    if (!(psds.e_max > 0.0)) throw ConfigError("psds: e_max must be > 0");
    if (psds.dataset_duration_h < 0.0)
      throw ConfigError("psds: dataset_duration_h must be >= 0");
    if (corpus.sample_rate != frontend.stft.sample_rate)
      throw ConfigError("config: corpus.sample_rate != frontend.sample_rate (" +
                        std::to_string(corpus.sample_rate) + " vs " +
                        std::to_string(frontend.stft.sample_rate) + ")");
  }
};

namespace config_detail {

inline void check_keys(const Json& j, const std::string& prefix,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config: '" + prefix + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + (prefix.empty() ? key : prefix + "." + key) +
                        "'");
  }
}

template <class T>
void read(const Json& j, const std::string& prefix, const char* key, T& out) {
  if (!j.contains(key)) return;
  // nlohmann would silently wrap negative integers into unsigned targets
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    const Json& v = j.at(key);
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
      throw ConfigError("config: bad value for '" + prefix + "." + key + "': must be >= 0");
  }
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for '" + prefix + "." + key + "': " + e.what());
  }
}

inline void read_enum(const Json& j, const std::string& prefix, const char* key,
                      WindowKind& out) {
  if (!j.contains(key)) return;
  const std::string s = j.at(key).get<std::string>();
  if (s == "hann")
    out = WindowKind::kHann;
  else if (s == "rectangular")
    out = WindowKind::kRectangular;
  else
    throw ConfigError("config: unknown window '" + s + "' at " + prefix + "." + key);
}

}  // namespace config_detail

inline RunConfig run_config_from_json(const Json& j) {
  using config_detail::check_keys;
  using config_detail::read;
  RunConfig cfg;
  check_keys(j, "", {"seed", "corpus", "frontend", "augment", "model", "train", "detect",
                     "psds", "paths"});
  read(j, "", "seed", cfg.seed);

  if (j.contains("corpus")) {
    const Json& c = j.at("corpus");
    check_keys(c, "corpus",
               {"sample_rate", "clip_duration_s", "n_positive", "n_negative", "n_noise",
                "snr_db_lo", "snr_db_hi", "chirp_prob", "gain_lo", "gain_hi", "test_gain_lo",
                "test_gain_hi", "test_fraction"});
    read(c, "corpus", "sample_rate", cfg.corpus.sample_rate);
    read(c, "corpus", "clip_duration_s", cfg.corpus.clip_duration_s);
    read(c, "corpus", "n_positive", cfg.corpus.n_positive);
    read(c, "corpus", "n_negative", cfg.corpus.n_negative);
    read(c, "corpus", "n_noise", cfg.corpus.n_noise);
    read(c, "corpus", "snr_db_lo", cfg.corpus.snr_db_lo);
    read(c, "corpus", "snr_db_hi", cfg.corpus.snr_db_hi);
    read(c, "corpus", "chirp_prob", cfg.corpus.chirp_prob);
    read(c, "corpus", "gain_lo", cfg.corpus.gain_lo);
    read(c, "corpus", "gain_hi", cfg.corpus.gain_hi);
    read(c, "corpus", "test_gain_lo", cfg.corpus.test_gain_lo);
    read(c, "corpus", "test_gain_hi", cfg.corpus.test_gain_hi);
    read(c, "corpus", "test_fraction", cfg.corpus.test_fraction);
  }

  if (j.contains("frontend")) {
    const Json& f = j.at("frontend");
    check_keys(f, "frontend",
               {"frame_length", "hop_length", "window", "sample_rate", "n_mels", "f_min",
                "f_max", "pcen", "compression", "pcen_position", "trainable_kernels",
                "log_floor"});
    read(f, "frontend", "frame_length", cfg.frontend.stft.frame_length);
    read(f, "frontend", "hop_length", cfg.frontend.stft.hop_length);
    config_detail::read_enum(f, "frontend", "window", cfg.frontend.stft.window);
    read(f, "frontend", "sample_rate", cfg.frontend.stft.sample_rate);
    read(f, "frontend", "n_mels", cfg.frontend.n_mels);
    read(f, "frontend", "f_min", cfg.frontend.f_min);
    read(f, "frontend", "f_max", cfg.frontend.f_max);
    read(f, "frontend", "trainable_kernels", cfg.frontend.trainable_kernels);
    read(f, "frontend", "log_floor", cfg.frontend.log_floor);
    if (f.contains("compression"))
      cfg.frontend.compression = compression_from_string(f.at("compression").get<std::string>());
    if (f.contains("pcen_position"))
      cfg.frontend.pcen_position =
          pcen_position_from_string(f.at("pcen_position").get<std::string>());
    if (f.contains("pcen")) {
      const Json& p = f.at("pcen");
      check_keys(p, "frontend.pcen",
                 {"alpha", "delta", "r", "s", "epsilon", "train_alpha", "train_delta",
                  "train_r", "train_s"});
      read(p, "frontend.pcen", "alpha", cfg.frontend.pcen.alpha);
      read(p, "frontend.pcen", "delta", cfg.frontend.pcen.delta);
      read(p, "frontend.pcen", "r", cfg.frontend.pcen.r);
      read(p, "frontend.pcen", "s", cfg.frontend.pcen.s);
      read(p, "frontend.pcen", "epsilon", cfg.frontend.pcen.epsilon);
      read(p, "frontend.pcen", "train_alpha", cfg.frontend.pcen.train_alpha);
      read(p, "frontend.pcen", "train_delta", cfg.frontend.pcen.train_delta);
      read(p, "frontend.pcen", "train_r", cfg.frontend.pcen.train_r);
      read(p, "frontend.pcen", "train_s", cfg.frontend.pcen.train_s);
    }
  }

  if (j.contains("augment")) {
    const Json& a = j.at("augment");
    check_keys(a, "augment", {"mix_enabled", "mix", "mask_enabled", "mask"});
    read(a, "augment", "mix_enabled", cfg.augment.mix_enabled);
    read(a, "augment", "mask_enabled", cfg.augment.mask_enabled);
    if (a.contains("mix")) {
      const Json& m = a.at("mix");
      check_keys(m, "augment.mix", {"probability", "snr_db_lo", "snr_db_hi", "noise_dir"});
      read(m, "augment.mix", "probability", cfg.augment.mix.probability);
      read(m, "augment.mix", "snr_db_lo", cfg.augment.mix.snr_db_lo);
      read(m, "augment.mix", "snr_db_hi", cfg.augment.mix.snr_db_hi);
      read(m, "augment.mix", "noise_dir", cfg.augment.mix.noise_dir);
    }
    if (a.contains("mask")) {
      const Json& m = a.at("mask");
      check_keys(m, "augment.mask",
                 {"n_freq_masks", "max_freq_width", "n_time_masks", "max_time_width",
                  "mask_value"});
      read(m, "augment.mask", "n_freq_masks", cfg.augment.mask.n_freq_masks);
      read(m, "augment.mask", "max_freq_width", cfg.augment.mask.max_freq_width);
      read(m, "augment.mask", "n_time_masks", cfg.augment.mask.n_time_masks);
      read(m, "augment.mask", "max_time_width", cfg.augment.mask.max_time_width);
      if (m.contains("mask_value")) {
        const std::string v = m.at("mask_value").get<std::string>();
        if (v == "zero")
          cfg.augment.mask.mask_value = MaskValue::kZero;
        else if (v == "per_channel_mean")
          cfg.augment.mask.mask_value = MaskValue::kPerChannelMean;
        else
          throw ConfigError("config: unknown mask_value '" + v + "'");
      }
    }
  }

  if (j.contains("model")) {
    const Json& m = j.at("model");
    check_keys(m, "model", {"conv_blocks", "hidden_dim", "dropout_p"});
    read(m, "model", "hidden_dim", cfg.model.hidden_dim);
    read(m, "model", "dropout_p", cfg.model.dropout_p);
    if (m.contains("conv_blocks")) {
      cfg.model.conv_blocks.clear();
      for (const Json& b : m.at("conv_blocks")) {
        if (!b.is_array() || b.size() != 4)
          throw ConfigError(
              "config: model.conv_blocks entries must be [out_channels, kernel_h, kernel_w, "
              "stride]");
        for (const Json& field : b)
          if (field.is_number_integer() && !field.is_number_unsigned() &&
              field.get<long long>() < 0)
            throw ConfigError("config: model.conv_blocks entries must be >= 0");
        ConvBlockConfig blk;
        blk.out_channels = b.at(0).get<std::size_t>();
        blk.kernel_h = b.at(1).get<std::size_t>();
        blk.kernel_w = b.at(2).get<std::size_t>();
        blk.stride = b.at(3).get<std::size_t>();
        cfg.model.conv_blocks.push_back(blk);
      }
    }
  }

  if (j.contains("train")) {
    const Json& t = j.at("train");
    check_keys(t, "train",
               {"optimizer", "learning_rate", "momentum", "beta1", "beta2", "eps",
                "batch_size", "epochs", "lr_pcen_scale", "min_event_overlap_s"});
    if (t.contains("optimizer"))
      cfg.train.optim.kind = optimizer_kind_from_string(t.at("optimizer").get<std::string>());
    read(t, "train", "learning_rate", cfg.train.optim.learning_rate);
    read(t, "train", "momentum", cfg.train.optim.momentum);
    read(t, "train", "beta1", cfg.train.optim.beta1);
    read(t, "train", "beta2", cfg.train.optim.beta2);
    read(t, "train", "eps", cfg.train.optim.eps);
    read(t, "train", "batch_size", cfg.train.batch_size);
    read(t, "train", "epochs", cfg.train.epochs);
    read(t, "train", "lr_pcen_scale", cfg.train.lr_pcen_scale);
    read(t, "train", "min_event_overlap_s", cfg.train.min_event_overlap_s);
  }

  if (j.contains("detect")) {
    const Json& d = j.at("detect");
    check_keys(d, "detect",
               {"thresholds", "median_window", "min_duration", "merge_gap", "window_hop_s"});
    read(d, "detect", "thresholds", cfg.detect.thresholds);
    read(d, "detect", "median_window", cfg.detect.median_window);
    read(d, "detect", "min_duration", cfg.detect.min_duration);
    read(d, "detect", "merge_gap", cfg.detect.merge_gap);
    read(d, "detect", "window_hop_s", cfg.detect.window_hop_s);
  }

  if (j.contains("psds")) {
    const Json& p = j.at("psds");
    check_keys(p, "psds", {"dtc_threshold", "gtc_threshold", "e_max", "dataset_duration_h"});
    read(p, "psds", "dtc_threshold", cfg.psds.dtc_threshold);
    read(p, "psds", "gtc_threshold", cfg.psds.gtc_threshold);
    read(p, "psds", "e_max", cfg.psds.e_max);
    read(p, "psds", "dataset_duration_h", cfg.psds.dataset_duration_h);
  }

  if (j.contains("paths")) {
    const Json& p = j.at("paths");
    check_keys(p, "paths", {"corpus_dir", "run_dir"});
    read(p, "paths", "corpus_dir", cfg.paths.corpus_dir);
    read(p, "paths", "run_dir", cfg.paths.run_dir);
  }

  cfg.validate();
  return cfg;
}

inline Json run_config_to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["corpus"] = {{"sample_rate", cfg.corpus.sample_rate},
                 {"clip_duration_s", cfg.corpus.clip_duration_s},
                 {"n_positive", cfg.corpus.n_positive},
                 {"n_negative", cfg.corpus.n_negative},
                 {"n_noise", cfg.corpus.n_noise},
                 {"snr_db_lo", cfg.corpus.snr_db_lo},
                 {"snr_db_hi", cfg.corpus.snr_db_hi},
                 {"chirp_prob", cfg.corpus.chirp_prob},
                 {"gain_lo", cfg.corpus.gain_lo},
                 {"gain_hi", cfg.corpus.gain_hi},
                 {"test_gain_lo", cfg.corpus.test_gain_lo},
                 {"test_gain_hi", cfg.corpus.test_gain_hi},
                 {"test_fraction", cfg.corpus.test_fraction}};
  j["frontend"] = {
      {"frame_length", cfg.frontend.stft.frame_length},
      {"hop_length", cfg.frontend.stft.hop_length},
      {"window", cfg.frontend.stft.window == WindowKind::kHann ? "hann" : "rectangular"},
      {"sample_rate", cfg.frontend.stft.sample_rate},
      {"n_mels", cfg.frontend.n_mels},
      {"f_min", cfg.frontend.f_min},
      {"f_max", cfg.frontend.f_max},
      {"pcen",
       {{"alpha", cfg.frontend.pcen.alpha},
        {"delta", cfg.frontend.pcen.delta},
        {"r", cfg.frontend.pcen.r},
        {"s", cfg.frontend.pcen.s},
        {"epsilon", cfg.frontend.pcen.epsilon},
        {"train_alpha", cfg.frontend.pcen.train_alpha},
        {"train_delta", cfg.frontend.pcen.train_delta},
        {"train_r", cfg.frontend.pcen.train_r},
        {"train_s", cfg.frontend.pcen.train_s}}},
      {"compression", to_string(cfg.frontend.compression)},
      {"pcen_position", to_string(cfg.frontend.pcen_position)},
      {"trainable_kernels", cfg.frontend.trainable_kernels},
      {"log_floor", cfg.frontend.log_floor}};
  j["augment"] = {
      {"mix_enabled", cfg.augment.mix_enabled},
      {"mix",
       {{"probability", cfg.augment.mix.probability},
        {"snr_db_lo", cfg.augment.mix.snr_db_lo},
        {"snr_db_hi", cfg.augment.mix.snr_db_hi},
        {"noise_dir", cfg.augment.mix.noise_dir}}},
      {"mask_enabled", cfg.augment.mask_enabled},
      {"mask",
       {{"n_freq_masks", cfg.augment.mask.n_freq_masks},
        {"max_freq_width", cfg.augment.mask.max_freq_width},
        {"n_time_masks", cfg.augment.mask.n_time_masks},
        {"max_time_width", cfg.augment.mask.max_time_width},
        {"mask_value",
         cfg.augment.mask.mask_value == MaskValue::kZero ? "zero" : "per_channel_mean"}}}};
  Json blocks = Json::array();
  for (const ConvBlockConfig& b : cfg.model.conv_blocks)
    blocks.push_back({b.out_channels, b.kernel_h, b.kernel_w, b.stride});
  j["model"] = {{"conv_blocks", blocks},
                {"hidden_dim", cfg.model.hidden_dim},
                {"dropout_p", cfg.model.dropout_p}};
  j["train"] = {{"optimizer", to_string(cfg.train.optim.kind)},
                {"learning_rate", cfg.train.optim.learning_rate},
                {"momentum", cfg.train.optim.momentum},
                {"beta1", cfg.train.optim.beta1},
                {"beta2", cfg.train.optim.beta2},
                {"eps", cfg.train.optim.eps},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"lr_pcen_scale", cfg.train.lr_pcen_scale},
                {"min_event_overlap_s", cfg.train.min_event_overlap_s}};
  j["detect"] = {{"thresholds", cfg.detect.thresholds},
                 {"median_window", cfg.detect.median_window},
                 {"min_duration", cfg.detect.min_duration},
                 {"merge_gap", cfg.detect.merge_gap},
                 {"window_hop_s", cfg.detect.window_hop_s}};
  j["psds"] = {{"dtc_threshold", cfg.psds.dtc_threshold},
               {"gtc_threshold", cfg.psds.gtc_threshold},
               {"e_max", cfg.psds.e_max},
               {"dataset_duration_h", cfg.psds.dataset_duration_h}};
  j["paths"] = {{"corpus_dir", cfg.paths.corpus_dir}, {"run_dir", cfg.paths.run_dir}};
  return j;
}

// "train.epochs=5" -> sets j["train"]["epochs"] = 5. The value is parsed as
// JSON when possible, otherwise taken as a string.
inline void apply_override(Json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects dotted.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(path.substr(start));
      break;
    }
    parts.push_back(path.substr(start, dot - start));
    start = dot + 1;
  }
  for (const std::string& p : parts)
    if (p.empty()) throw ConfigError("--set: empty path component in '" + path + "'");

  Json parsed = Json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // bare word: treat as string

  Json* node = &j;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = parsed;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return j;
}

inline RunConfig load_run_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides) {
  Json j = config_path.empty() ? Json::object() : load_json_file(config_path);
  for (const std::string& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace buzzline
