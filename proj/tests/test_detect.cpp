// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/detect.hpp"
#include "buzzline/rng.hpp"
#include "oracles.hpp"

namespace bz = buzzline;

namespace {

bz::FrameTrack track_of(std::vector<double> probs, double hop = 0.1) {
  bz::FrameTrack t;
  t.probabilities = std::move(probs);
  t.frame_hop_s = hop;
  t.clip_id = "clip";
  return t;
}

bz::DetectConfig plain_config() {
  bz::DetectConfig cfg;
  cfg.thresholds = {0.5};
  cfg.median_window = 1;  // no smoothing unless a test asks for it
  cfg.min_duration = 0.0;
  cfg.merge_gap = 0.0;
  return cfg;
}

double total_duration(const std::vector<bz::LabeledEvent>& evs) {
  double s = 0.0;
  for (const auto& e : evs) s += e.duration();
  return s;
}

}  // namespace

TEST_CASE("median filter matches a sort-based oracle", "[detect]") {
  bz::Rng rng(77);
  for (std::size_t window : {std::size_t{1}, std::size_t{3}, std::size_t{5}, std::size_t{9}}) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> x(1 + static_cast<std::size_t>(rng.uniform_int(0, 30)));
      for (double& v : x) v = rng.uniform(0.0, 1.0);
      REQUIRE(bz::median_filter(x, window) == oracle::median_filter_sort(x, window));
    }
  }

  SECTION("window one is the identity") {
    const std::vector<double> x = {0.3, 0.9, 0.1};
    REQUIRE(bz::median_filter(x, 1) == x);
  }
  SECTION("edges replicate the boundary sample") {
    // window 3 at i=0 sees {x0, x0, x1}: median is the closer of the two
    const std::vector<double> x = {1.0, 0.0, 0.0, 1.0};
    const std::vector<double> want = {1.0, 0.0, 0.0, 1.0};
    REQUIRE(bz::median_filter(x, 3) == want);
  }
  SECTION("lone spike is removed, lone dip is filled") {
    REQUIRE(bz::median_filter({0.0, 0.0, 1.0, 0.0, 0.0}, 3) ==
            std::vector<double>{0.0, 0.0, 0.0, 0.0, 0.0});
    REQUIRE(bz::median_filter({0.9, 0.9, 0.0, 0.9, 0.9}, 3) ==
            std::vector<double>{0.9, 0.9, 0.9, 0.9, 0.9});
  }
  SECTION("window larger than the signal still works") {
    REQUIRE(bz::median_filter({0.2, 0.8}, 9) == std::vector<double>{0.2, 0.8});
  }
  SECTION("empty input returns empty") { REQUIRE(bz::median_filter({}, 5).empty()); }
  SECTION("even or zero windows are usage errors") {
    REQUIRE_THROWS_AS(bz::median_filter({0.1}, 4), bz::UsageError);
    REQUIRE_THROWS_AS(bz::median_filter({0.1}, 0), bz::UsageError);
  }
}

TEST_CASE("default threshold sweep is an even grid inside (0,1)", "[detect]") {
  const std::vector<double> t = bz::default_thresholds();
  REQUIRE(t.size() == 50);
  for (std::size_t i = 0; i < t.size(); ++i)
    REQUIRE(t[i] == Catch::Approx((i + 1) / 51.0).margin(1e-15));

  const std::vector<double> t3 = bz::default_thresholds(3);
  REQUIRE(t3 == std::vector<double>{0.25, 0.5, 0.75});

  bz::DetectConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
}

TEST_CASE("events form from thresholded runs with merge and duration rules", "[detect]") {
  bz::DetectConfig cfg = plain_config();
  const bz::FrameTrack track =
      track_of({0.0, 0.9, 0.9, 0.0, 0.0, 0.8, 0.8, 0.8, 0.0});

  SECTION("distinct runs give distinct events at frame-grid times") {
    cfg.merge_gap = 0.15;  // gap here is 0.2 s, so no merge
    const auto evs = bz::to_events(track, 0.5, cfg);
    REQUIRE(evs.size() == 2);
    REQUIRE(evs[0].onset_s == Catch::Approx(0.1).margin(1e-12));
    REQUIRE(evs[0].offset_s == Catch::Approx(0.3).margin(1e-12));
    REQUIRE(evs[1].onset_s == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(evs[1].offset_s == Catch::Approx(0.8).margin(1e-12));
    REQUIRE(evs[0].label == "mosquito");
  }
  SECTION("gaps shorter than merge_gap are bridged") {
    cfg.merge_gap = 0.25;
    const auto evs = bz::to_events(track, 0.5, cfg);
    REQUIRE(evs.size() == 1);
    REQUIRE(evs[0].onset_s == Catch::Approx(0.1).margin(1e-12));
    REQUIRE(evs[0].offset_s == Catch::Approx(0.8).margin(1e-12));
  }
  SECTION("a gap exactly equal to merge_gap stays open") {
    const bz::FrameTrack two = track_of({0.9, 0.0, 0.0, 0.9});
    cfg.merge_gap = 0.2;
    REQUIRE(bz::to_events(two, 0.5, cfg).size() == 2);
    cfg.merge_gap = 0.2000001;
    REQUIRE(bz::to_events(two, 0.5, cfg).size() == 1);
  }
  SECTION("short events are dropped after merging") {
    cfg.min_duration = 0.25;
    cfg.merge_gap = 0.15;
    const auto evs = bz::to_events(track, 0.5, cfg);
    REQUIRE(evs.size() == 1);  // the 0.2 s run is gone, the 0.3 s run stays
    REQUIRE(evs[0].onset_s == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("probability equal to the threshold is active") {
    const auto evs = bz::to_events(track_of({0.5}), 0.5, cfg);
    REQUIRE(evs.size() == 1);
    REQUIRE(evs[0].onset_s == 0.0);
    REQUIRE(evs[0].offset_s == Catch::Approx(0.1).margin(1e-12));
  }
  SECTION("an active tail closes at the clip edge") {
    const auto evs = bz::to_events(track_of({0.0, 0.9, 0.9}), 0.5, cfg);
    REQUIRE(evs.size() == 1);
    REQUIRE(evs[0].offset_s == Catch::Approx(0.3).margin(1e-12));
  }
  SECTION("nothing above threshold gives no events") {
    REQUIRE(bz::to_events(track_of({0.1, 0.2, 0.3}), 0.5, cfg).empty());
  }
}

TEST_CASE("median smoothing is applied before thresholding", "[detect]") {
  bz::DetectConfig cfg = plain_config();
  cfg.median_window = 3;
  REQUIRE(bz::to_events(track_of({0.0, 0.0, 1.0, 0.0, 0.0}), 0.4, cfg).empty());
  const auto evs = bz::to_events(track_of({0.9, 0.9, 0.0, 0.9, 0.9}), 0.4, cfg);
  REQUIRE(evs.size() == 1);
  REQUIRE(evs[0].onset_s == 0.0);
  REQUIRE(evs[0].offset_s == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("total active duration never grows with the threshold", "[detect]") {
  bz::DetectConfig cfg = plain_config();
  bz::Rng rng(31);
  std::vector<double> probs(200);
  for (double& v : probs) v = rng.uniform(0.0, 1.0);
  const bz::FrameTrack track = track_of(std::move(probs));
  double prev = 1e9;
  for (double theta : bz::default_thresholds(9)) {
    const double cur = total_duration(bz::to_events(track, theta, cfg));
    REQUIRE(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("detection inputs are validated", "[detect]") {
  bz::DetectConfig cfg = plain_config();
  const bz::FrameTrack track = track_of({0.5, 0.5});

  SECTION("threshold must lie strictly inside (0,1)") {
    REQUIRE_THROWS_AS(bz::to_events(track, 0.0, cfg), bz::UsageError);
    REQUIRE_THROWS_AS(bz::to_events(track, 1.0, cfg), bz::UsageError);
  }
  SECTION("track invariants") {
    bz::FrameTrack bad = track_of({1.2});
    REQUIRE_THROWS_AS(bz::to_events(bad, 0.5, cfg), bz::UsageError);
    bad = track_of({0.5});
    bad.frame_hop_s = 0.0;
    REQUIRE_THROWS_AS(bz::to_events(bad, 0.5, cfg), bz::UsageError);
  }
  SECTION("config validation") {
    bz::DetectConfig bad = cfg;
    bad.thresholds = {0.5, 0.5};
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
    bad = cfg;
    bad.thresholds = {0.3, 0.2};
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
    bad = cfg;
    bad.thresholds = {0.0, 0.5};
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
    bad = cfg;
    bad.thresholds.clear();
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
    bad = cfg;
    bad.median_window = 4;
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
    bad = cfg;
    bad.min_duration = -0.1;
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
    bad = cfg;
    bad.window_hop_s = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), bz::ConfigError);
  }
}

TEST_CASE("stitch overlap-averages window probabilities onto the frame grid", "[detect]") {
  SECTION("hand case with one shared frame") {
    const std::vector<std::vector<double>> wins = {{0.2, 0.4, 0.6}, {0.8, 0.6, 0.4}};
    const bz::FrameTrack t = bz::stitch(wins, 2, 0.05, "c1");
    REQUIRE(t.clip_id == "c1");
    REQUIRE(t.frame_hop_s == 0.05);
    REQUIRE(t.probabilities.size() == 5);
    REQUIRE(t.probabilities[0] == Catch::Approx(0.2).margin(1e-15));
    REQUIRE(t.probabilities[1] == Catch::Approx(0.4).margin(1e-15));
    REQUIRE(t.probabilities[2] == Catch::Approx((0.6 + 0.8) / 2.0).margin(1e-15));
    REQUIRE(t.probabilities[3] == Catch::Approx(0.6).margin(1e-15));
    REQUIRE(t.probabilities[4] == Catch::Approx(0.4).margin(1e-15));
  }
  SECTION("random windows match an accumulate/count oracle") {
    bz::Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t n_win = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
      const std::size_t len = 4 + static_cast<std::size_t>(rng.uniform_int(0, 4));
      const std::size_t hop = 1 + static_cast<std::size_t>(rng.uniform_int(0, len - 1));
      std::vector<std::vector<double>> wins(n_win, std::vector<double>(len));
      for (auto& w : wins)
        for (double& v : w) v = rng.uniform(0.0, 1.0);

      std::vector<double> sum((n_win - 1) * hop + len, 0.0);
      std::vector<int> cnt(sum.size(), 0);
      for (std::size_t w = 0; w < n_win; ++w)
        for (std::size_t i = 0; i < len; ++i) {
          sum[w * hop + i] += wins[w][i];
          ++cnt[w * hop + i];
        }
      const bz::FrameTrack t = bz::stitch(wins, hop, 0.01, "c");
      REQUIRE(t.probabilities.size() == sum.size());
      for (std::size_t i = 0; i < sum.size(); ++i)
        REQUIRE(t.probabilities[i] == Catch::Approx(sum[i] / cnt[i]).margin(1e-15));
    }
  }
  SECTION("a coverage gap is a data error naming the frame") {
    const std::vector<std::vector<double>> wins = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
    REQUIRE_THROWS_WITH(bz::stitch(wins, 4, 0.05, "gappy"),
                        Catch::Matchers::ContainsSubstring("frame 3") &&
                            Catch::Matchers::ContainsSubstring("gappy"));
  }
  SECTION("degenerate inputs are usage errors") {
    REQUIRE_THROWS_AS(bz::stitch({}, 1, 0.05, "c"), bz::UsageError);
    REQUIRE_THROWS_AS(bz::stitch({{0.5}}, 0, 0.05, "c"), bz::UsageError);
    REQUIRE_THROWS_AS(bz::stitch({{0.5}, {}}, 1, 0.05, "c"), bz::UsageError);
  }
}
