#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace ptc {

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

// Verbosity comes from the PTC_LOG environment variable (quiet, warn, info,
// debug). Diagnostics go to stderr so machine-readable output on stdout and
// in files stays clean.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("PTC_LOG");
    if (!env) return LogLevel::warn;
    const std::string v(env);
    if (v == "quiet" || v == "0") return LogLevel::quiet;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_warn(const std::string& msg) {
  if (log_level() >= LogLevel::warn) std::cerr << "warning: " << msg << "\n";
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << msg << "\n";
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << msg << "\n";
}

}  // namespace ptc
