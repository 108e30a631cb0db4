// Copyright 2026 The Buzzline Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace buzzline::log {

enum class Level { kError = 0, kInfo = 1, kDebug = 2 };

inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("BUZZLINE_LOG");
    if (env == nullptr) return Level::kInfo;
    const std::string s(env);
    if (s == "error") return Level::kError;
    if (s == "debug") return Level::kDebug;
    return Level::kInfo;
  }();
  return level;
}

inline void emit(Level level, const std::string& msg) {
  if (level > threshold()) return;
  static std::mutex mu;
  const char* tag = level == Level::kError ? "error" : level == Level::kInfo ? "info" : "debug";
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[buzzline:" << tag << "] " << msg << "\n";
}

inline void error(const std::string& msg) { emit(Level::kError, msg); }
inline void info(const std::string& msg) { emit(Level::kInfo, msg); }
inline void debug(const std::string& msg) { emit(Level::kDebug, msg); }

}  // namespace buzzline::log
