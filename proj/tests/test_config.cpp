// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "buzzline/checkpoint.hpp"
#include "buzzline/common.hpp"
#include "buzzline/config.hpp"
#include "buzzline/nn.hpp"
#include "buzzline/optim.hpp"
#include "buzzline/params.hpp"
#include "buzzline/rng.hpp"
#include "oracles.hpp"

namespace bz = buzzline;

TEST_CASE("defaults survive a json round trip byte for byte", "[config]") {
  const bz::RunConfig defaults;
  const bz::Json j1 = bz::run_config_to_json(defaults);
  const bz::RunConfig back = bz::run_config_from_json(j1);
  const bz::Json j2 = bz::run_config_to_json(back);
  REQUIRE(j1.dump(2) == j2.dump(2));

  SECTION("an empty object means pure defaults") {
    const bz::RunConfig from_empty = bz::run_config_from_json(bz::Json::object());
    REQUIRE(bz::run_config_to_json(from_empty).dump() == j1.dump());
  }
  SECTION("empty path loads defaults") {
    const bz::RunConfig cfg = bz::load_run_config("", {});
    REQUIRE(bz::run_config_to_json(cfg).dump() == j1.dump());
  }
}

TEST_CASE("non-default values survive the round trip", "[config]") {
  bz::RunConfig cfg;
  cfg.seed = 99;
  cfg.corpus.sample_rate = 8000;
  cfg.corpus.n_positive = 7;
  cfg.corpus.test_fraction = 0.5;
  cfg.frontend.stft.frame_length = 256;
  cfg.frontend.stft.hop_length = 64;
  cfg.frontend.stft.sample_rate = 8000;
  cfg.frontend.stft.window = bz::WindowKind::kRectangular;
  cfg.frontend.n_mels = 24;
  cfg.frontend.compression = bz::Compression::kLog;
  cfg.frontend.pcen_position = bz::PcenPosition::kBeforeMel;
  cfg.frontend.trainable_kernels = true;
  cfg.frontend.pcen.alpha = 0.9;
  cfg.frontend.pcen.train_s = true;
  cfg.augment.mix_enabled = false;
  cfg.augment.mix.snr_db_lo = -3.0;
  cfg.augment.mix.noise_dir = "elsewhere/noise";
  cfg.augment.mask.n_freq_masks = 3;
  cfg.augment.mask.mask_value = bz::MaskValue::kPerChannelMean;
  cfg.model.conv_blocks = {{4, 3, 5, 1}, {8, 3, 3, 2}};
  cfg.model.hidden_dim = 12;
  cfg.model.dropout_p = 0.25;
  cfg.train.optim.kind = bz::OptimizerKind::kSgdMomentum;
  cfg.train.optim.learning_rate = 0.5;
  cfg.train.epochs = 3;
  cfg.detect.thresholds = {0.1, 0.9};
  cfg.detect.median_window = 7;
  cfg.psds.dataset_duration_h = 2.5;
  cfg.paths.run_dir = "runs/alt";

  const bz::RunConfig back = bz::run_config_from_json(bz::run_config_to_json(cfg));
  REQUIRE(back.seed == 99);
  REQUIRE(back.corpus.sample_rate == 8000);
  REQUIRE(back.corpus.n_positive == 7);
  REQUIRE(back.corpus.test_fraction == 0.5);
  REQUIRE(back.frontend.stft.frame_length == 256);
  REQUIRE(back.frontend.stft.window == bz::WindowKind::kRectangular);
  REQUIRE(back.frontend.n_mels == 24);
  REQUIRE(back.frontend.compression == bz::Compression::kLog);
  REQUIRE(back.frontend.pcen_position == bz::PcenPosition::kBeforeMel);
  REQUIRE(back.frontend.trainable_kernels);
  REQUIRE(back.frontend.pcen.alpha == 0.9);
  REQUIRE(back.frontend.pcen.train_s);
  REQUIRE_FALSE(back.augment.mix_enabled);
  REQUIRE(back.augment.mix.snr_db_lo == -3.0);
  REQUIRE(back.augment.mix.noise_dir == "elsewhere/noise");
  REQUIRE(back.augment.mask.n_freq_masks == 3);
  REQUIRE(back.augment.mask.mask_value == bz::MaskValue::kPerChannelMean);
  REQUIRE(back.model.conv_blocks.size() == 2);
  REQUIRE(back.model.conv_blocks[1].out_channels == 8);
  REQUIRE(back.model.conv_blocks[1].stride == 2);
  REQUIRE(back.model.hidden_dim == 12);
  REQUIRE(back.model.dropout_p == 0.25);
  REQUIRE(back.train.optim.kind == bz::OptimizerKind::kSgdMomentum);
  REQUIRE(back.train.optim.learning_rate == 0.5);
  REQUIRE(back.train.epochs == 3);
  REQUIRE(back.detect.thresholds == std::vector<double>{0.1, 0.9});
  REQUIRE(back.detect.median_window == 7);
  REQUIRE(back.psds.dataset_duration_h == 2.5);
  REQUIRE(back.paths.run_dir == "runs/alt");
}

TEST_CASE("unknown keys are rejected with their dotted path", "[config]") {
  using Catch::Matchers::ContainsSubstring;
  bz::Json j = bz::Json::object();
  j["bogus"] = 1;
  REQUIRE_THROWS_WITH(bz::run_config_from_json(j), ContainsSubstring("unknown key 'bogus'"));

  j = bz::Json::object();
  j["frontend"]["stft"] = bz::Json::object();  // flat schema, no nested stft block
  REQUIRE_THROWS_WITH(bz::run_config_from_json(j),
                      ContainsSubstring("unknown key 'frontend.stft'"));

  j = bz::Json::object();
  j["frontend"]["pcen"]["zeta"] = 2.0;
  REQUIRE_THROWS_WITH(bz::run_config_from_json(j),
                      ContainsSubstring("unknown key 'frontend.pcen.zeta'"));

  j = bz::Json::object();
  j["augment"]["mix"]["foo"] = 1;
  REQUIRE_THROWS_WITH(bz::run_config_from_json(j),
                      ContainsSubstring("unknown key 'augment.mix.foo'"));
}

TEST_CASE("bad values and bad shapes are config errors", "[config]") {
  bz::Json j = bz::Json::object();
  j["train"]["epochs"] = -1;  // negative into size_t
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  j = bz::Json::object();
  j["frontend"]["n_mels"] = "many";
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  j = bz::Json::object();
  j["frontend"]["window"] = "blackman";
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  j = bz::Json::object();
  j["frontend"]["compression"] = "mu-law";
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  j = bz::Json::object();
  j["train"]["optimizer"] = "lbfgs";
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  j = bz::Json::object();
  j["model"]["conv_blocks"] = {{4, 3, 3}};  // want 4 entries
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  j = bz::Json::object();
  j["augment"]["mask"]["mask_value"] = "median";
  REQUIRE_THROWS_AS(bz::run_config_from_json(j), bz::ConfigError);

  SECTION("cross-field validation runs on load") {
    bz::Json mismatch = bz::Json::object();
    mismatch["corpus"]["sample_rate"] = 16000;  // frontend stays at the default rate
    REQUIRE_THROWS_WITH(bz::run_config_from_json(mismatch),
                        Catch::Matchers::ContainsSubstring("sample_rate"));

    bz::Json thresholds = bz::Json::object();
    thresholds["detect"]["thresholds"] = {0.5, 0.4};
    REQUIRE_THROWS_AS(bz::run_config_from_json(thresholds), bz::ConfigError);
  }
}

TEST_CASE("overrides parse values as json with a string fallback", "[config]") {
  bz::Json j = bz::Json::object();
  bz::apply_override(j, "train.epochs=5");
  REQUIRE(j["train"]["epochs"].is_number_integer());
  REQUIRE(j["train"]["epochs"] == 5);

  bz::apply_override(j, "frontend.pcen.s=0.05");
  REQUIRE(j["frontend"]["pcen"]["s"] == 0.05);

  bz::apply_override(j, "frontend.trainable_kernels=true");
  REQUIRE(j["frontend"]["trainable_kernels"] == true);

  bz::apply_override(j, "paths.run_dir=runs/exp one");
  REQUIRE(j["paths"]["run_dir"] == "runs/exp one");  // not valid json, kept as string

  bz::apply_override(j, "detect.thresholds=[0.2,0.5,0.8]");
  REQUIRE(j["detect"]["thresholds"] == bz::Json({0.2, 0.5, 0.8}));

  bz::apply_override(j, "model.conv_blocks=[[4,3,3,1],[8,3,3,2]]");
  bz::apply_override(j, "seed=42");
  const bz::RunConfig cfg = bz::run_config_from_json(j);
  REQUIRE(cfg.seed == 42);
  REQUIRE(cfg.train.epochs == 5);
  REQUIRE(cfg.frontend.pcen.s == 0.05);
  REQUIRE(cfg.model.conv_blocks.size() == 2);
  REQUIRE(cfg.paths.run_dir == "runs/exp one");

  SECTION("later overrides win") {
    bz::apply_override(j, "train.epochs=9");
    REQUIRE(j["train"]["epochs"] == 9);
  }
  SECTION("quoted strings pass through json parsing") {
    bz::apply_override(j, "paths.corpus_dir=\"with space\"");
    REQUIRE(j["paths"]["corpus_dir"] == "with space");
  }
  SECTION("malformed assignments are config errors") {
    REQUIRE_THROWS_AS(bz::apply_override(j, "no-equals"), bz::ConfigError);
    REQUIRE_THROWS_AS(bz::apply_override(j, "=5"), bz::ConfigError);
    REQUIRE_THROWS_AS(bz::apply_override(j, "a..b=1"), bz::ConfigError);
    REQUIRE_THROWS_AS(bz::apply_override(j, "a.=1"), bz::ConfigError);
  }
}

TEST_CASE("config files load with overrides applied on top", "[config]") {
  oracle::TempDir tmp("config");
  {
    std::ofstream f(tmp.str("run.json"));
    f << R"({"seed": 7, "train": {"epochs": 2}})";
  }
  const bz::RunConfig cfg = bz::load_run_config(tmp.str("run.json"), {"train.epochs=4"});
  REQUIRE(cfg.seed == 7);
  REQUIRE(cfg.train.epochs == 4);

  SECTION("missing file") {
    REQUIRE_THROWS_AS(bz::load_run_config(tmp.str("ghost.json"), {}), bz::ConfigError);
  }
  SECTION("invalid json") {
    std::ofstream f(tmp.str("broken.json"));
    f << "{nope";
    f.close();
    REQUIRE_THROWS_AS(bz::load_run_config(tmp.str("broken.json"), {}), bz::ConfigError);
  }
}

TEST_CASE("checkpoints restore parameters bit for bit", "[checkpoint]") {
  oracle::TempDir tmp("ckpt");
  const bz::RunConfig cfg;

  // awkward doubles: repeating fractions, tiny magnitudes, negative zero
  std::vector<double> a = {0.1, 1.0 / 3.0, std::sqrt(2.0), -0.0};
  std::vector<double> b = {1e-300, -7.25e17};
  bz::ParamStore store;
  store.add({"m.a", a.data(), 2, 2});
  store.add({"m.b", b.data(), 2, 1});

  bz::Rng rng(5);
  rng.normal();  // advance so the state is not the seed state
  const std::string path = tmp.str("ckpt.json");
  bz::save_checkpoint(path, store, cfg, 3, rng);

  const bz::LoadedCheckpoint ckpt = bz::load_checkpoint(path);
  REQUIRE(ckpt.epoch == 3);
  REQUIRE(ckpt.rng_state == rng.serialize());
  REQUIRE_FALSE(ckpt.has_optimizer);
  REQUIRE(bz::run_config_to_json(bz::run_config_from_json(ckpt.config_json)).dump() ==
          bz::run_config_to_json(cfg).dump());

  std::vector<double> a2(4, 9.9), b2(2, 9.9);
  bz::ParamStore store2;
  store2.add({"m.a", a2.data(), 2, 2});
  store2.add({"m.b", b2.data(), 2, 1});
  bz::restore_params(store2, ckpt);
  REQUIRE(a2 == a);
  REQUIRE(b2 == b);
  REQUIRE(std::signbit(a2[3]));

  SECTION("optimizer state rides along") {
    bz::OptimConfig ocfg;
    bz::Optimizer opt(ocfg);
    bz::GradientRecord g = {{"m.a", {1.0, 2.0, 3.0, 4.0}}, {"m.b", {0.5, 0.25}}};
    opt.step(store, g);
    opt.step(store, g);
    bz::save_checkpoint(path, store, cfg, 5, rng, &opt);
    const bz::LoadedCheckpoint loaded = bz::load_checkpoint(path);
    REQUIRE(loaded.has_optimizer);
    REQUIRE(loaded.optimizer_steps == 2);
    REQUIRE(loaded.optimizer_state == opt.export_state());
  }
}

TEST_CASE("checkpoint restore is strict in both directions", "[checkpoint]") {
  oracle::TempDir tmp("ckpt_strict");
  const bz::RunConfig cfg;
  std::vector<double> a = {1.0, 2.0};
  bz::ParamStore store;
  store.add({"m.a", a.data(), 2, 1});
  bz::Rng rng(1);
  const std::string path = tmp.str("c.json");
  bz::save_checkpoint(path, store, cfg, 0, rng);
  const bz::LoadedCheckpoint ckpt = bz::load_checkpoint(path);

  SECTION("extra registered parameter is missing from the checkpoint") {
    double extra = 0.0;
    bz::ParamStore bigger;
    std::vector<double> a2(2);
    bigger.add({"m.a", a2.data(), 2, 1});
    bigger.add({"m.extra", &extra, 1, 1});
    REQUIRE_THROWS_WITH(bz::restore_params(bigger, ckpt),
                        Catch::Matchers::ContainsSubstring("missing parameter m.extra"));
  }
  SECTION("checkpoint parameter unknown to the store") {
    double lone = 0.0;
    bz::ParamStore smaller;
    smaller.add({"m.other", &lone, 1, 1});
    REQUIRE_THROWS_AS(bz::restore_params(smaller, ckpt), bz::DataError);
  }
  SECTION("size mismatch") {
    std::vector<double> wide(3);
    bz::ParamStore wrong;
    wrong.add({"m.a", wide.data(), 3, 1});
    REQUIRE_THROWS_WITH(bz::restore_params(wrong, ckpt),
                        Catch::Matchers::ContainsSubstring("size mismatch for m.a"));
  }
}

TEST_CASE("malformed checkpoints are data errors", "[checkpoint]") {
  oracle::TempDir tmp("ckpt_bad");

  SECTION("missing file") {
    REQUIRE_THROWS_AS(bz::load_checkpoint(tmp.str("ghost.json")), bz::DataError);
  }
  SECTION("not json") {
    std::ofstream f(tmp.str("junk.json"));
    f << "{definitely not json";
    f.close();
    REQUIRE_THROWS_AS(bz::load_checkpoint(tmp.str("junk.json")), bz::DataError);
  }
  SECTION("wrong format tag") {
    bz::Json j;
    j["format"] = "somebody-elses-v9";
    bz::save_json_file(tmp.str("fmt.json"), j);
    REQUIRE_THROWS_WITH(bz::load_checkpoint(tmp.str("fmt.json")),
                        Catch::Matchers::ContainsSubstring("unsupported format"));
  }
  SECTION("missing format tag") {
    bz::save_json_file(tmp.str("nofmt.json"), bz::Json::object());
    REQUIRE_THROWS_AS(bz::load_checkpoint(tmp.str("nofmt.json")), bz::DataError);
  }
  SECTION("params of the wrong shape") {
    bz::Json j;
    j["format"] = bz::kCheckpointFormat;
    j["epoch"] = 0;
    j["config"] = bz::Json::object();
    j["params"] = {{"m.a", "not-an-array"}};
    j["rng"] = "x";
    bz::save_json_file(tmp.str("shape.json"), j);
    REQUIRE_THROWS_AS(bz::load_checkpoint(tmp.str("shape.json")), bz::DataError);
  }
}

TEST_CASE("a full model round-trips through a checkpoint", "[checkpoint]") {
  oracle::TempDir tmp("ckpt_model");
  bz::RunConfig cfg;
  cfg.model.conv_blocks = {{3, 3, 3, 1}};
  cfg.model.hidden_dim = 4;

  bz::Rng init(42);
  bz::TinyCnn model(cfg.model, 8, init);
  bz::ParamStore store;
  model.register_params(store);
  bz::save_checkpoint(tmp.str("m.json"), store, cfg, 1, init);

  // a differently-initialized clone converges to the exact saved weights
  bz::Rng other(43);
  bz::TinyCnn clone(cfg.model, 8, other);
  bz::ParamStore store2;
  clone.register_params(store2);
  bz::restore_params(store2, bz::load_checkpoint(tmp.str("m.json")));

  bz::Rng probe(7);
  bz::Matrix feat(8, 5);
  for (double& v : feat.data) v = probe.normal();
  bz::CnnSaved s1, s2;
  model.forward(feat, false, nullptr, s1);
  clone.forward(feat, false, nullptr, s2);
  REQUIRE(s1.frame_logits == s2.frame_logits);
  REQUIRE(s1.segment_logit == s2.segment_logit);
}
