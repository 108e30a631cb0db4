// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "buzzline/manifest.hpp"
#include "buzzline/rng.hpp"
#include "buzzline/wav.hpp"
#include "oracles.hpp"

using namespace buzzline;

namespace {

AudioClip sine_clip(int rate, double seconds, double hz, double amp) {
  AudioClip c;
  c.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  return c;
}

// Minimal by-hand WAV writer so the reader is tested against independently
// constructed bytes, not against save_wav.
void put_u32(std::ofstream& f, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  f.write(b, 4);
}
void put_u16(std::ofstream& f, std::uint16_t v) {
  char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  f.write(b, 2);
}

void write_pcm16(const std::string& path, int rate, int channels,
                 const std::vector<std::int16_t>& interleaved) {
  std::ofstream f(path, std::ios::binary);
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  f.write("RIFF", 4);
  put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, 1);  // PCM
  put_u16(f, static_cast<std::uint16_t>(channels));
  put_u32(f, static_cast<std::uint32_t>(rate));
  put_u32(f, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(f, static_cast<std::uint16_t>(channels * 2));
  put_u16(f, 16);
  f.write("data", 4);
  put_u32(f, data_bytes);
  for (std::int16_t s : interleaved) put_u16(f, static_cast<std::uint16_t>(s));
}

}  // namespace

TEST_CASE("wav round-trip preserves samples to 16-bit precision", "[wav]") {
  oracle::TempDir tmp("wav_rt");
  const AudioClip clip = sine_clip(8000, 0.25, 440.0, 0.7);
  save_wav(tmp.str("t.wav"), clip);
  const AudioClip back = load_wav(tmp.str("t.wav"));
  REQUIRE(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == clip.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    worst = std::max(worst, std::abs(back.samples[i] - clip.samples[i]));
  REQUIRE(worst <= 1.0 / 32768.0 + 1e-12);  // one quantization step
}

TEST_CASE("reader decodes hand-written PCM16 bytes", "[wav]") {
  oracle::TempDir tmp("wav_hand");
  write_pcm16(tmp.str("h.wav"), 8000, 1, {0, 16384, -16384, 32767, -32768});
  const AudioClip c = load_wav(tmp.str("h.wav"));
  REQUIRE(c.samples.size() == 5);
  REQUIRE(c.samples[0] == 0.0);
  REQUIRE(c.samples[1] == Catch::Approx(0.5).margin(1e-9));
  REQUIRE(c.samples[2] == Catch::Approx(-0.5).margin(1e-9));
  REQUIRE(c.samples[3] == Catch::Approx(32767.0 / 32768.0).margin(1e-9));
  REQUIRE(c.samples[4] == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("stereo downmixes by channel mean", "[wav]") {
  oracle::TempDir tmp("wav_stereo");
  // L=0.5, R=-0.5 -> 0; L=R=0.25 -> 0.25
  write_pcm16(tmp.str("s.wav"), 8000, 2, {16384, -16384, 8192, 8192});
  const AudioClip c = load_wav(tmp.str("s.wav"));
  REQUIRE(c.samples.size() == 2);
  REQUIRE(c.samples[0] == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(c.samples[1] == Catch::Approx(0.25).margin(1e-9));
}

TEST_CASE("probe reports geometry without decoding", "[wav]") {
  oracle::TempDir tmp("wav_probe");
  write_pcm16(tmp.str("p.wav"), 16000, 2, std::vector<std::int16_t>(640, 0));
  const WavInfo info = probe_wav(tmp.str("p.wav"));
  REQUIRE(info.sample_rate == 16000);
  REQUIRE(info.channels == 2);
  REQUIRE(info.frames == 320);
  REQUIRE(info.duration_s() == Catch::Approx(0.02).margin(1e-12));
}

TEST_CASE("malformed or unsupported wavs raise data errors", "[wav]") {
  oracle::TempDir tmp("wav_bad");
  REQUIRE_THROWS_AS(load_wav(tmp.str("missing.wav")), DataError);

  {
    std::ofstream f(tmp.str("junk.wav"), std::ios::binary);
    f << "this is not a riff file at all";
  }
  REQUIRE_THROWS_AS(load_wav(tmp.str("junk.wav")), DataError);

  {  // claims a data chunk larger than the file
    std::ofstream f(tmp.str("trunc.wav"), std::ios::binary);
    f.write("RIFF", 4);
    put_u32(f, 1000);
    f.write("WAVE", 4);
    f.write("data", 4);
    put_u32(f, 999999);
  }
  REQUIRE_THROWS_AS(load_wav(tmp.str("trunc.wav")), DataError);

  {  // 8-bit PCM is out of scope
    std::ofstream f(tmp.str("pcm8.wav"), std::ios::binary);
    f.write("RIFF", 4);
    put_u32(f, 36 + 4);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(f, 16);
    put_u16(f, 1);
    put_u16(f, 1);
    put_u32(f, 8000);
    put_u32(f, 8000);
    put_u16(f, 1);
    put_u16(f, 8);
    f.write("data", 4);
    put_u32(f, 4);
    f.write("\0\0\0\0", 4);
  }
  REQUIRE_THROWS_AS(load_wav(tmp.str("pcm8.wav")), DataError);
}

TEST_CASE("save clamps out-of-range samples", "[wav]") {
  oracle::TempDir tmp("wav_clamp");
  AudioClip c;
  c.sample_rate = 8000;
  c.samples = {2.0, -3.0, 0.5};
  save_wav(tmp.str("c.wav"), c);
  const AudioClip back = load_wav(tmp.str("c.wav"));
  REQUIRE(back.samples[0] == Catch::Approx(32767.0 / 32768.0).margin(1e-9));
  REQUIRE(back.samples[1] == Catch::Approx(-1.0).margin(1e-9));
  REQUIRE(back.samples[2] == Catch::Approx(0.5).margin(1e-4));
}

TEST_CASE("manifest round-trips entries, events and splits", "[manifest]") {
  oracle::TempDir tmp("manifest_rt");
  Manifest m;
  m.base_dir = tmp.path();
  m.entries.push_back({"a.wav", {{0.5, 1.25, "mosquito"}, {2.0, 2.5, "mosquito"}}, "train"});
  m.entries.push_back({"b.wav", {}, "test"});
  save_manifest(tmp.str("manifest.csv"), m);

  const Manifest back = load_manifest(tmp.str("manifest.csv"), /*require_files=*/false);
  REQUIRE(back.entries.size() == 2);
  REQUIRE(back.entries[0].file == "a.wav");
  REQUIRE(back.entries[0].split == "train");
  REQUIRE(back.entries[0].events.size() == 2);
  REQUIRE(back.entries[0].events[0].onset_s == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(back.entries[0].events[1].offset_s == Catch::Approx(2.5).margin(1e-12));
  REQUIRE(back.entries[1].events.empty());
  REQUIRE(back.split("test").size() == 1);
  REQUIRE(back.split("train").size() == 1);
  REQUIRE(back.resolve(back.entries[0]).string() == tmp.str("a.wav"));
}

TEST_CASE("manifest loader rejects malformed rows", "[manifest]") {
  oracle::TempDir tmp("manifest_bad");
  {
    std::ofstream f(tmp.str("bad.csv"));
    f << "file,onset,offset,label,split\n";
    f << "a.wav,1.0,0.5,mosquito,train\n";  // offset before onset
  }
  REQUIRE_THROWS_AS(load_manifest(tmp.str("bad.csv"), false), DataError);
  {
    std::ofstream f(tmp.str("bad2.csv"));
    f << "file,onset,offset,label,split\n";
    f << "a.wav,xyz,0.5,mosquito,train\n";  // non-numeric onset
  }
  REQUIRE_THROWS_AS(load_manifest(tmp.str("bad2.csv"), false), DataError);
  REQUIRE_THROWS_AS(load_manifest(tmp.str("missing.csv"), false), DataError);
}

TEST_CASE("manifest with require_files checks wav presence", "[manifest]") {
  oracle::TempDir tmp("manifest_req");
  {
    std::ofstream f(tmp.str("m.csv"));
    f << "file,onset,offset,label,split\n";
    f << "ghost.wav,,,,train\n";
  }
  REQUIRE_THROWS_AS(load_manifest(tmp.str("m.csv"), true), DataError);
  REQUIRE_NOTHROW(load_manifest(tmp.str("m.csv"), false));
}

TEST_CASE("labeled event invariants", "[manifest]") {
  LabeledEvent ok{0.0, 1.0, "mosquito"};
  REQUIRE_NOTHROW(ok.check_invariants());
  LabeledEvent bad{1.0, 1.0, "mosquito"};
  REQUIRE_THROWS_AS(bad.check_invariants(), DataError);
  LabeledEvent neg{-0.5, 1.0, "mosquito"};
  REQUIRE_THROWS_AS(neg.check_invariants(), DataError);
}
