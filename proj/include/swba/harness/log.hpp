#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

namespace swba {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Reads the level from SWBA_LOG (error|warn|info|debug or 0-3). Defaults to info.
inline LogLevel log_level_from_env() {
  const char* v = std::getenv("SWBA_LOG");
  if (!v) return LogLevel::kInfo;
  const std::string_view s(v);
  if (s == "error" || s == "0") return LogLevel::kError;
  if (s == "warn" || s == "1") return LogLevel::kWarn;
  if (s == "debug" || s == "3") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

inline LogLevel& log_level() {
  static LogLevel level = log_level_from_env();
  return level;
}

inline void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] %s\n", kNames[static_cast<int>(level)], msg.c_str());
}

}  // namespace swba
