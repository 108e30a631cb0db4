// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "buzzline/config.hpp"
#include "buzzline/detect.hpp"
#include "buzzline/frontend.hpp"
#include "buzzline/nn.hpp"

namespace buzzline {

struct Detection {
  std::string clip_id;
  LabeledEvent event;
  double threshold = 0.0;
};

// Sliding-window frame probabilities for one clip. Windows are
// segment-duration long, hop-aligned to the STFT frame grid, and the tail
// window is zero-padded; the stitched track is truncated to the clip's own
// duration so no event can extend into the padding.
class WindowedScorer {
 public:
  WindowedScorer(const Frontend& frontend, const TinyCnn& model, const DetectConfig& detect,
                 double window_duration_s)
      : frontend_(frontend), model_(model), detect_(detect) {
    detect_.validate();
    const StftConfig& stft = frontend_.config().stft;
    window_len_ = static_cast<std::size_t>(std::llround(window_duration_s * stft.sample_rate));
    if (window_len_ < stft.frame_length)
      throw ConfigError("infer: window shorter than one STFT frame");
    const double hop_samples_exact = detect_.window_hop_s * stft.sample_rate;
    hop_frames_ = static_cast<std::size_t>(
        std::llround(hop_samples_exact / static_cast<double>(stft.hop_length)));
    if (hop_frames_ == 0) hop_frames_ = 1;
    hop_samples_ = hop_frames_ * stft.hop_length;
    if (hop_samples_ > window_len_)
      throw ConfigError("infer: window hop exceeds the window length");
  }

  std::size_t hop_frames() const { return hop_frames_; }

  FrameTrack track(const AudioClip& clip, const std::string& clip_id) const {
    const StftConfig& stft = frontend_.config().stft;
    if (clip.sample_rate != stft.sample_rate)
      throw ConfigError("infer: clip sample rate " + std::to_string(clip.sample_rate) +
                        " != config " + std::to_string(stft.sample_rate));
    if (clip.samples.empty()) throw DataError("infer: empty clip " + clip_id);

    std::vector<std::vector<double>> window_probs;
    for (std::size_t start = 0;; start += hop_samples_) {
      AudioClip win;
      win.sample_rate = clip.sample_rate;
      win.samples.assign(window_len_, 0.0);
      if (start < clip.samples.size()) {
        const std::size_t count = std::min(window_len_, clip.samples.size() - start);
        std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(start), count,
                    win.samples.begin());
      }
      CnnSaved saved;
      Matrix features = frontend_.forward(win);
      model_.forward(features, /*train=*/false, nullptr, saved);
      std::vector<double> probs(saved.frame_logits.size());
      for (std::size_t t = 0; t < probs.size(); ++t) probs[t] = sigmoid(saved.frame_logits[t]);
      window_probs.push_back(std::move(probs));
      if (start + window_len_ >= clip.samples.size()) break;
    }

    FrameTrack tr = stitch(window_probs, hop_frames_, frontend_.frame_hop_s(), clip_id);
    // frames fully inside the real clip (padding tail dropped)
    if (clip.samples.size() >= stft.frame_length) {
      const std::size_t clip_frames = stft.n_frames(clip.samples.size());
      if (tr.probabilities.size() > clip_frames) tr.probabilities.resize(clip_frames);
    }
    return tr;
  }

  // full threshold sweep; events clipped to the true clip duration
  std::vector<Detection> detections(const AudioClip& clip, const std::string& clip_id) const {
    const FrameTrack tr = track(clip, clip_id);
    const double clip_duration = clip.duration_s();
    std::vector<Detection> out;
    for (double threshold : detect_.thresholds) {
      for (LabeledEvent ev : to_events(tr, threshold, detect_)) {
        ev.offset_s = std::min(ev.offset_s, clip_duration);
        if (!(ev.offset_s - ev.onset_s >= detect_.min_duration)) continue;
        Detection d;
        d.clip_id = clip_id;
        d.event = ev;
        d.threshold = threshold;
        out.push_back(std::move(d));
      }
    }
    return out;
  }

 private:
  const Frontend& frontend_;
  const TinyCnn& model_;
  DetectConfig detect_;
  std::size_t window_len_ = 0;
  std::size_t hop_frames_ = 0;
  std::size_t hop_samples_ = 0;
};

inline void write_detections_jsonl(const std::string& path,
                                   const std::vector<Detection>& detections) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const Detection& d : detections) {
    Json j;
    j["clip_id"] = d.clip_id;
    j["onset_s"] = d.event.onset_s;
    j["offset_s"] = d.event.offset_s;
    j["label"] = d.event.label;
    j["threshold"] = d.threshold;
    out << j.dump() << "\n";
  }
}

inline std::vector<Detection> read_detections_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detections file: " + path);
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("detections: line " + std::to_string(line_no) + " is not a JSON object");
    try {
      Detection d;
      d.clip_id = j.at("clip_id").get<std::string>();
      d.event.onset_s = j.at("onset_s").get<double>();
      d.event.offset_s = j.at("offset_s").get<double>();
      if (j.contains("label")) d.event.label = j.at("label").get<std::string>();
      d.threshold = j.at("threshold").get<double>();
      d.event.check_invariants();
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("detections: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace buzzline
