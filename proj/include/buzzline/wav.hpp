// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "buzzline/audio.hpp"
#include "buzzline/common.hpp"

namespace buzzline {

// RIFF/WAVE reader and writer. Scope: PCM 16-bit and IEEE float-32,
// mono or stereo. Stereo is downmixed by channel mean on load.

namespace wav_detail {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatIeeeFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void write_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

inline void write_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

struct ParsedWav {
  FmtChunk fmt;
  std::vector<unsigned char> data;
};

inline ParsedWav parse(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("wav: malformed RIFF/WAVE header: " + path);

  ParsedWav w;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk_size = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size())
      throw DataError("wav: truncated chunk '" + std::string(id, 4) + "': " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("wav: fmt chunk too short: " + path);
      w.fmt.format = read_u16(bytes.data() + body);
      w.fmt.channels = read_u16(bytes.data() + body + 2);
      w.fmt.sample_rate = read_u32(bytes.data() + body + 4);
      w.fmt.bits_per_sample = read_u16(bytes.data() + body + 14);
      if (w.fmt.format == kFormatExtensible && chunk_size >= 40) {
        // Sub-format GUID starts with the effective format tag.
        w.fmt.format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      w.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(body),
                    bytes.begin() + static_cast<std::ptrdiff_t>(body + chunk_size));
      have_data = true;
    }
    pos = body + chunk_size + (chunk_size % 2);  // chunks are word-aligned
  }
  if (!have_fmt) throw DataError("wav: missing fmt chunk: " + path);
  if (!have_data) throw DataError("wav: missing data chunk: " + path);
  return w;
}

}  // namespace wav_detail

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  std::size_t frames = 0;  // samples per channel
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0;
  }
};

// Header-only probe; does not decode samples.
inline WavInfo probe_wav(const std::string& path) {
  using namespace wav_detail;
  const ParsedWav w = parse(path);
  if (w.fmt.channels < 1 || w.fmt.channels > 2)
    throw DataError("wav: unsupported channel count " + std::to_string(w.fmt.channels) + ": " + path);
  const std::size_t bytes_per_sample = w.fmt.bits_per_sample / 8;
  if (bytes_per_sample == 0) throw DataError("wav: zero bits per sample: " + path);
  WavInfo info;
  info.sample_rate = static_cast<int>(w.fmt.sample_rate);
  info.channels = w.fmt.channels;
  info.frames = w.data.size() / (bytes_per_sample * w.fmt.channels);
  return info;
}

// Load a WAV file as a mono clip. 16-bit samples are scaled by 1/32768;
// stereo is downmixed by channel mean; no resampling. If any sample
// magnitude exceeds 1 (possible with float32 payloads) the clip is
// normalized by its peak.
inline AudioClip load_wav(const std::string& path) {
  using namespace wav_detail;
  const ParsedWav w = parse(path);

  if (w.fmt.channels < 1 || w.fmt.channels > 2)
    throw DataError("wav: unsupported channel count " + std::to_string(w.fmt.channels) + ": " + path);
  const bool pcm16 = w.fmt.format == kFormatPcm && w.fmt.bits_per_sample == 16;
  const bool f32 = w.fmt.format == kFormatIeeeFloat && w.fmt.bits_per_sample == 32;
  if (!pcm16 && !f32)
    throw DataError("wav: unsupported codec (format tag " + std::to_string(w.fmt.format) +
                    ", " + std::to_string(w.fmt.bits_per_sample) + " bit): " + path);
  if (w.data.empty()) throw DataError("wav: empty data chunk: " + path);

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t stride = bytes_per_sample * w.fmt.channels;
  const std::size_t frames = w.data.size() / stride;
  if (frames == 0) throw DataError("wav: empty data chunk: " + path);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(w.fmt.sample_rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t ch = 0; ch < w.fmt.channels; ++ch) {
      const unsigned char* p = w.data.data() + i * stride + ch * bytes_per_sample;
      if (pcm16) {
        const std::int16_t raw = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        acc += static_cast<double>(raw) / 32768.0;
      } else {
        std::uint32_t u = read_u32(p);
        float f;
        std::memcpy(&f, &u, sizeof(f));
        acc += static_cast<double>(f);
      }
    }
    clip.samples[i] = acc / w.fmt.channels;
  }

  const double pk = clip.peak();
  if (pk > 1.0) {
    for (double& s : clip.samples) s /= pk;
  }
  clip.check_invariants();
  return clip;
}

// Write a mono clip as 16-bit PCM. Samples are clamped to [-1, 1].
inline void save_wav(const std::string& path, const AudioClip& clip) {
  using namespace wav_detail;
  clip.check_invariants();
  std::vector<unsigned char> out;
  out.reserve(44 + clip.samples.size() * 2);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  write_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  write_u32(out, 16);
  write_u16(out, kFormatPcm);
  write_u16(out, 1);
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  write_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const long scaled = std::lrint(clamped * 32768.0);
    const auto raw = static_cast<std::int16_t>(std::clamp(scaled, -32768L, 32767L));
    write_u16(out, static_cast<std::uint16_t>(raw));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("wav: cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("wav: write failed: " + path);
}

}  // namespace buzzline
