// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// buzzline: synthesize corpora, train the detector, run inference, score
// detections, ablate pipeline components, and benchmark the front-end.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "buzzline/bench.hpp"
#include "buzzline/checkpoint.hpp"
#include "buzzline/config.hpp"
#include "buzzline/corpus.hpp"
#include "buzzline/evalrun.hpp"
#include "buzzline/infer.hpp"
#include "buzzline/log.hpp"
#include "buzzline/train.hpp"

namespace {

using namespace buzzline;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_dir;
  std::size_t workers = 1;  // reserved; modules run single-threaded
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "run-config JSON file");
  cmd->add_option("--set", o.sets, "dotted-path override, e.g. --set train.epochs=5")
      ->take_all();
  cmd->add_option("--seed", o.seed, "override config seed");
  cmd->add_option("--run-dir", o.run_dir, "override paths.run_dir");
  cmd->add_option("--workers", o.workers, "worker cap (reserved)");
}

RunConfig resolve_config(const CommonOpts& o) {
  std::vector<std::string> sets = o.sets;
  if (o.seed.has_value()) sets.push_back("seed=" + std::to_string(*o.seed));
  if (o.run_dir.has_value()) sets.push_back("paths.run_dir=" + *o.run_dir);
  return load_run_config(o.config_path, sets);
}

RunConfig resolve_config_from_checkpoint(const LoadedCheckpoint& ckpt, const CommonOpts& o) {
  Json j = ckpt.config_json;
  for (const std::string& s : o.sets) apply_override(j, s);
  if (o.seed.has_value()) apply_override(j, "seed=" + std::to_string(*o.seed));
  if (o.run_dir.has_value()) apply_override(j, "paths.run_dir=" + *o.run_dir);
  return run_config_from_json(j);
}

// Every run directory gets the resolved config and a machine-readable exit
// summary. Neither contains timestamps, so reruns are byte-identical.
void write_run_artifacts(const std::string& dir, const RunConfig* cfg,
                         const std::string& command, int exit_code,
                         const std::string& error = "") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return;
  try {
    if (cfg != nullptr) save_json_file(dir + "/resolved_config.json", run_config_to_json(*cfg));
    Json summary;
    summary["command"] = command;
    summary["exit_code"] = exit_code;
    summary["status"] = exit_code == kExitOk            ? "ok"
                        : exit_code == kExitConfigError ? "config_error"
                        : exit_code == kExitDataError   ? "data_error"
                        : exit_code == kExitNumericError ? "numeric_error"
                                                         : "error";
    if (!error.empty()) summary["error"] = error;
    save_json_file(dir + "/exit_summary.json", summary);
  } catch (const std::exception&) {
    // artifact writing must not mask the primary outcome
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitConfigError;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return kExitDataError;
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return kExitNumericError;
  return kExitFailure;
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonOpts& common, const std::string& out_flag) {
  RunConfig cfg = resolve_config(common);
  const std::string out_dir = out_flag.empty() ? cfg.paths.corpus_dir : out_flag;
  const SynthResult corpus = synth_corpus(cfg.corpus, cfg.seed);
  write_corpus(corpus, out_dir);
  write_run_artifacts(out_dir, &cfg, "synth", kExitOk);
  log::info("synth: wrote " + std::to_string(corpus.clips.size()) + " clips + " +
            std::to_string(corpus.noise_clips.size()) + " noise files to " + out_dir);
  return kExitOk;
}

int cmd_train(const CommonOpts& common) {
  RunConfig cfg = resolve_config(common);
  const PipelineRunResult result = run_training_pipeline(cfg, cfg.paths.run_dir);
  write_run_artifacts(cfg.paths.run_dir, &cfg, "train", kExitOk);
  log::info("train: final eval accuracy " + std::to_string(result.train.final_eval_acc));
  if (result.evaluated) log::info("train: test-split psds " + std::to_string(result.eval.psds));
  return kExitOk;
}

int cmd_infer(const CommonOpts& common, const std::string& checkpoint_path,
              const std::string& audio, const std::string& out_flag) {
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig cfg = resolve_config_from_checkpoint(ckpt, common);

  Frontend frontend(cfg.frontend);
  Rng init_rng = Rng::derive(cfg.seed, "model-init");
  TinyCnn model(cfg.model, cfg.frontend.n_mels, init_rng);
  ParamStore store;
  frontend.register_params(store, cfg.train.lr_pcen_scale);
  model.register_params(store);
  restore_params(store, ckpt);
  frontend.on_params_updated();

  // audio may be a manifest CSV or a directory of WAVs
  std::vector<std::pair<std::string, std::filesystem::path>> clips;
  if (audio.size() > 4 && audio.substr(audio.size() - 4) == ".csv") {
    Manifest m = load_manifest(audio);
    for (const ManifestEntry& e : m.entries) clips.emplace_back(e.file, m.resolve(e));
  } else if (std::filesystem::is_directory(audio)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(audio))
      if (entry.is_regular_file() && entry.path().extension() == ".wav")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) clips.emplace_back(f.filename().string(), f);
  } else {
    throw DataError("infer: --audio must be a manifest CSV or a directory of WAVs: " + audio);
  }
  if (clips.empty()) throw DataError("infer: no input WAVs under " + audio);

  WindowedScorer scorer(frontend, model, cfg.detect, cfg.corpus.clip_duration_s);
  std::vector<Detection> detections;
  for (const auto& [clip_id, path] : clips) {
    const AudioClip clip = load_wav(path.string());
    for (Detection& d : scorer.detections(clip, clip_id)) detections.push_back(std::move(d));
  }

  const std::string out_path =
      out_flag.empty() ? cfg.paths.run_dir + "/detections.jsonl" : out_flag;
  std::filesystem::create_directories(std::filesystem::path(out_path).parent_path());
  write_detections_jsonl(out_path, detections);
  write_run_artifacts(cfg.paths.run_dir, &cfg, "infer", kExitOk);
  log::info("infer: wrote " + std::to_string(detections.size()) + " detections to " + out_path);
  return kExitOk;
}

int cmd_eval(const CommonOpts& common, const std::string& detections_path,
             const std::string& manifest_path, std::string out_metrics, std::string out_roc) {
  RunConfig cfg = resolve_config(common);
  PsdsConfig pcfg = cfg.psds;
  // with an explicit duration the manifest WAVs need not be present on disk
  const bool need_probe = pcfg.dataset_duration_h <= 0.0;
  Manifest gt = load_manifest(manifest_path, /*require_files=*/need_probe);
  if (need_probe) pcfg.dataset_duration_h = manifest_duration_h(gt);

  const std::vector<Detection> detections = read_detections_jsonl(detections_path);
  const EvalOutput result = evaluate_detections(detections, gt, pcfg, cfg.detect.thresholds);

  if (out_metrics.empty()) out_metrics = cfg.paths.run_dir + "/metrics.json";
  if (out_roc.empty()) out_roc = cfg.paths.run_dir + "/roc.csv";
  std::filesystem::create_directories(std::filesystem::path(out_metrics).parent_path());
  std::filesystem::create_directories(std::filesystem::path(out_roc).parent_path());
  write_metrics_json(out_metrics, result);
  write_roc_csv(out_roc, result.points);
  write_run_artifacts(cfg.paths.run_dir, &cfg, "eval", kExitOk);

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", result.psds);
  std::cout << "psds " << buf << "\n";
  return kExitOk;
}

int cmd_ablate(const CommonOpts& common, const std::string& out_flag) {
  RunConfig cfg = resolve_config(common);
  const std::string work_dir = out_flag.empty() ? cfg.paths.run_dir : out_flag;
  const std::vector<AblationArmResult> results = run_ablation(cfg, work_dir);
  std::filesystem::create_directories(work_dir);
  write_ablation_csv(work_dir + "/ablation.csv", results);
  write_run_artifacts(work_dir, &cfg, "ablate", kExitOk);
  std::cout << "arm,status,psds\n";
  for (const AblationArmResult& r : results) {
    char buf[160];
    if (r.ok)
      std::snprintf(buf, sizeof(buf), "%s,ok,%.6f", r.name.c_str(), r.psds);
    else
      std::snprintf(buf, sizeof(buf), "%s,failed,", r.name.c_str());
    std::cout << buf << "\n";
  }
  return kExitOk;
}

int cmd_bench(const CommonOpts& common, std::size_t clips, std::size_t reps,
              std::optional<std::size_t> frame_length, std::optional<std::size_t> hop,
              const std::string& out_flag) {
  RunConfig cfg = resolve_config(common);
  StftConfig stft = cfg.frontend.stft;
  if (frame_length.has_value()) stft.frame_length = *frame_length;
  if (hop.has_value()) stft.hop_length = *hop;
  stft.validate();

  const std::vector<BenchReport> reports =
      run_bench(clips, stft, reps, cfg.seed, cfg.corpus.clip_duration_s);

  Json j;
  Json arr = Json::array();
  std::printf("%-22s %12s %12s %12s\n", "strategy", "clips/s", "wall_s", "dispersion");
  for (const BenchReport& r : reports) {
    std::printf("%-22s %12.2f %12.4f %12.4f\n", r.strategy.c_str(), r.clips_per_second,
                r.wall_time_s, r.dispersion);
    arr.push_back({{"strategy", r.strategy},
                   {"clips_per_second", r.clips_per_second},
                   {"wall_time_s", r.wall_time_s},
                   {"dispersion", r.dispersion},
                   {"repetitions", r.repetitions},
                   {"corpus_size", r.corpus_size},
                   {"frame_length", r.config.frame_length},
                   {"hop_length", r.config.hop_length},
                   {"sample_rate", r.config.sample_rate}});
  }
  const double ratio = reports[1].clips_per_second / reports[0].clips_per_second;
  std::printf("throughput ratio (%s / %s): %.2fx\n", reports[1].strategy.c_str(),
              reports[0].strategy.c_str(), ratio);
  j["strategies"] = std::move(arr);
  j["throughput_ratio"] = ratio;

  const std::string out_path =
      out_flag.empty() ? cfg.paths.run_dir + "/bench_report.json" : out_flag;
  std::filesystem::create_directories(std::filesystem::path(out_path).parent_path());
  save_json_file(out_path, j);
  write_run_artifacts(cfg.paths.run_dir, &cfg, "bench", kExitOk);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"buzzline: mosquito-buzz event detection pipeline"};
  app.require_subcommand(1);

  CommonOpts synth_o, train_o, infer_o, eval_o, ablate_o, bench_o;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "synthesize a labeled corpus");
  add_common(synth, synth_o);
  synth->add_option("--out", synth_out, "output corpus directory (default paths.corpus_dir)");

  CLI::App* train = app.add_subcommand("train", "train the detector on a corpus");
  add_common(train, train_o);

  std::string infer_ckpt, infer_audio, infer_out;
  CLI::App* infer = app.add_subcommand("infer", "run inference, emit detections JSONL");
  add_common(infer, infer_o);
  infer->add_option("--checkpoint", infer_ckpt, "trained checkpoint JSON")->required();
  infer->add_option("--audio", infer_audio, "WAV directory or manifest CSV")->required();
  infer->add_option("--out", infer_out, "detections output path");

  std::string eval_dets, eval_manifest, eval_metrics, eval_roc;
  CLI::App* eval = app.add_subcommand("eval", "score detections against ground truth");
  add_common(eval, eval_o);
  eval->add_option("--detections", eval_dets, "detections JSONL")->required();
  eval->add_option("--manifest", eval_manifest, "ground-truth manifest CSV")->required();
  eval->add_option("--out-metrics", eval_metrics, "metrics JSON output path");
  eval->add_option("--out-roc", eval_roc, "ROC CSV output path");

  std::string ablate_out;
  CLI::App* ablate = app.add_subcommand("ablate", "train and score the 5 ablation arms");
  add_common(ablate, ablate_o);
  ablate->add_option("--out", ablate_out, "work directory (default paths.run_dir)");

  std::size_t bench_clips = 256, bench_reps = 3;
  std::optional<std::size_t> bench_frame, bench_hop;
  std::string bench_out;
  CLI::App* bench = app.add_subcommand("bench", "benchmark spectrogram strategies");
  add_common(bench, bench_o);
  bench->add_option("--clips", bench_clips, "number of synthetic clips");
  bench->add_option("--reps", bench_reps, "timing repetitions (>= 3)");
  bench->add_option("--frame-length", bench_frame, "STFT frame length override");
  bench->add_option("--hop", bench_hop, "STFT hop override");
  bench->add_option("--out", bench_out, "report JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFailure;  // usage errors exit 1
  }

  const CLI::App* sub = app.get_subcommands().front();
  std::string command = sub->get_name();
  std::string fail_dir;  // best-effort artifact target on failure
  try {
    if (sub == synth) return cmd_synth(synth_o, synth_out);
    if (sub == train) {
      fail_dir = train_o.run_dir.value_or("");
      return cmd_train(train_o);
    }
    if (sub == infer) return cmd_infer(infer_o, infer_ckpt, infer_audio, infer_out);
    if (sub == eval) return cmd_eval(eval_o, eval_dets, eval_manifest, eval_metrics, eval_roc);
    if (sub == ablate) {
      fail_dir = ablate_out;
      return cmd_ablate(ablate_o, ablate_out);
    }
    if (sub == bench)
      return cmd_bench(bench_o, bench_clips, bench_reps, bench_frame, bench_hop, bench_out);
    throw UsageError("unknown subcommand");
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    log::error(command + ": " + e.what());
    if (!fail_dir.empty()) write_run_artifacts(fail_dir, nullptr, command, code, e.what());
    return code;
  }
}
