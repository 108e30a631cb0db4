// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "buzzline/config.hpp"
#include "buzzline/optim.hpp"
#include "buzzline/params.hpp"
#include "buzzline/rng.hpp"

namespace buzzline {

inline constexpr const char* kCheckpointFormat = "buzzline-checkpoint-v1";

// JSON doubles round-trip exactly (shortest-representation printing), so a
// save/load cycle restores bit-identical parameters.
inline Json checkpoint_to_json(const ParamStore& store, const RunConfig& cfg,
                               std::int64_t epoch, const Rng& rng,
                               const Optimizer* opt = nullptr) {
  Json j;
  j["format"] = kCheckpointFormat;
  j["epoch"] = epoch;
  j["config"] = run_config_to_json(cfg);
  Json params = Json::object();
  Json shapes = Json::object();
  for (const Param& p : store.all()) {
    params[p.name] = std::vector<double>(p.data, p.data + p.size());
    shapes[p.name] = {p.rows, p.cols};
  }
  j["params"] = std::move(params);
  j["param_shapes"] = std::move(shapes);
  j["rng"] = rng.serialize();
  if (opt != nullptr) {
    Json o;
    o["step_count"] = opt->step_count();
    Json state = Json::object();
    for (const auto& [name, bufs] : opt->export_state()) state[name] = bufs;
    o["state"] = std::move(state);
    j["optimizer"] = std::move(o);
  }
  return j;
}

struct LoadedCheckpoint {
  std::int64_t epoch = 0;
  Json config_json;
  std::map<std::string, std::vector<double>> params;
  std::string rng_state;
  std::int64_t optimizer_steps = 0;
  std::map<std::string, std::vector<std::vector<double>>> optimizer_state;
  bool has_optimizer = false;
};

inline LoadedCheckpoint checkpoint_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("format"))
    throw DataError("checkpoint: missing format field");
  if (j.at("format").get<std::string>() != kCheckpointFormat)
    throw DataError("checkpoint: unsupported format '" +
                    j.at("format").get<std::string>() + "'");
  LoadedCheckpoint ckpt;
  try {
    ckpt.epoch = j.at("epoch").get<std::int64_t>();
    ckpt.config_json = j.at("config");
    for (const auto& [name, values] : j.at("params").items())
      ckpt.params[name] = values.get<std::vector<double>>();
    ckpt.rng_state = j.at("rng").get<std::string>();
    if (j.contains("optimizer")) {
      ckpt.has_optimizer = true;
      ckpt.optimizer_steps = j.at("optimizer").at("step_count").get<std::int64_t>();
      for (const auto& [name, bufs] : j.at("optimizer").at("state").items())
        ckpt.optimizer_state[name] = bufs.get<std::vector<std::vector<double>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed container: ") + e.what());
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const ParamStore& store,
                            const RunConfig& cfg, std::int64_t epoch, const Rng& rng,
                            const Optimizer* opt = nullptr) {
  save_json_file(path, checkpoint_to_json(store, cfg, epoch, rng, opt));
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("checkpoint is not valid JSON: " + path);
  return checkpoint_from_json(j);
}

// Strict restore: the checkpoint and the registered parameters must agree
// exactly — a mismatch means the config and checkpoint drifted apart.
inline void restore_params(ParamStore& store, const LoadedCheckpoint& ckpt) {
  for (const Param& p : store.all())
    if (ckpt.params.find(p.name) == ckpt.params.end())
      throw DataError("checkpoint: missing parameter " + p.name);
  for (const auto& [name, values] : ckpt.params) {
    Param* p = store.find(name);
    if (p == nullptr) throw DataError("checkpoint: unknown parameter " + name);
    if (values.size() != p->size())
      throw DataError("checkpoint: size mismatch for " + name + ": " +
                      std::to_string(values.size()) + " vs " + std::to_string(p->size()));
    std::copy(values.begin(), values.end(), p->data);
  }
}

}  // namespace buzzline
