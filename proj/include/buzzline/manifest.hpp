// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "buzzline/common.hpp"
#include "buzzline/wav.hpp"

namespace buzzline {

// (onset, offset, label) in seconds. Ground-truth and detected events share
// this type; PSDS consumes it on both sides.
struct LabeledEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::string label = "mosquito";

  double duration() const { return offset_s - onset_s; }

  void check_invariants() const {
    if (!(onset_s >= 0.0 && onset_s < offset_s))
      throw DataError("LabeledEvent: require 0 <= onset < offset, got [" +
                      std::to_string(onset_s) + ", " + std::to_string(offset_s) + ")");
  }
};

struct ManifestEntry {
  std::string file;  // relative to the manifest's directory
  std::vector<LabeledEvent> events;
  std::string split = "train";
};

// CSV-backed label index: header `file,onset,offset,label,split`, one row per
// event, empty onset/offset for event-free files.
struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const { return base_dir / e.file; }
  std::filesystem::path resolve(const std::string& file) const { return base_dir / file; }

  std::vector<ManifestEntry> split(const std::string& tag) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (tag.empty() || e.split == tag) out.push_back(e);
    return out;
  }
};

namespace manifest_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace manifest_detail

// `require_files` controls the existence/duration checks: corpus ingestion
// requires real WAVs on disk; eval with an explicit dataset duration accepts
// bare clip ids.
inline Manifest load_manifest(const std::string& path, bool require_files = true) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open: " + path);

  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path();

  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: empty file: " + path);
  if (manifest_detail::split_csv_line(line) !=
      std::vector<std::string>{"file", "onset", "offset", "label", "split"})
    throw DataError("manifest: bad header (want file,onset,offset,label,split): " + path);

  // Preserve first-appearance order of files while merging multi-event rows.
  std::vector<std::string> order;
  std::map<std::string, ManifestEntry> by_file;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = manifest_detail::split_csv_line(line);
    if (f.size() != 5)
      throw DataError("manifest: line " + std::to_string(lineno) + ": want 5 fields, got " +
                      std::to_string(f.size()));
    auto it = by_file.find(f[0]);
    if (it == by_file.end()) {
      order.push_back(f[0]);
      it = by_file.emplace(f[0], ManifestEntry{f[0], {}, f[4]}).first;
    }
    if (!f[1].empty() || !f[2].empty()) {
      LabeledEvent ev;
      try {
        ev.onset_s = std::stod(f[1]);
        ev.offset_s = std::stod(f[2]);
      } catch (const std::exception&) {
        throw DataError("manifest: line " + std::to_string(lineno) + ": bad onset/offset");
      }
      ev.label = f[3];
      ev.check_invariants();
      it->second.events.push_back(ev);
    }
  }

  for (const auto& name : order) m.entries.push_back(by_file.at(name));

  if (require_files) {
    for (const auto& e : m.entries) {
      const auto full = m.resolve(e);
      if (!std::filesystem::exists(full))
        throw DataError("manifest: referenced file missing: " + full.string());
      const WavInfo info = probe_wav(full.string());
      for (const auto& ev : e.events) {
        if (ev.offset_s > info.duration_s() + 1e-9)
          throw DataError("manifest: event offset " + std::to_string(ev.offset_s) +
                          "s exceeds clip duration " + std::to_string(info.duration_s()) +
                          "s: " + e.file);
      }
    }
  }
  return m;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot open for writing: " + path);
  out << "file,onset,offset,label,split\n";
  for (const auto& e : m.entries) {
    if (e.events.empty()) {
      out << e.file << ",,,," << e.split << "\n";
    } else {
      for (const auto& ev : e.events) {
        std::ostringstream row;
        row.precision(17);
        row << e.file << "," << ev.onset_s << "," << ev.offset_s << "," << ev.label << ","
            << e.split;
        out << row.str() << "\n";
      }
    }
  }
  if (!out) throw DataError("manifest: write failed: " + path);
}

}  // namespace buzzline
