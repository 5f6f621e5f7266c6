#include "anatoforge/log.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>

namespace anatoforge {
namespace {

LogLevel parse_level(const char* s) {
  if (s == nullptr) return LogLevel::Info;
  if (std::strcmp(s, "debug") == 0) return LogLevel::Debug;
  if (std::strcmp(s, "info") == 0) return LogLevel::Info;
  if (std::strcmp(s, "warn") == 0) return LogLevel::Warn;
  if (std::strcmp(s, "error") == 0) return LogLevel::ErrorLevel;
  if (std::strcmp(s, "quiet") == 0) return LogLevel::Quiet;
  return LogLevel::Info;
}

std::atomic<int> g_level{-1};
std::mutex g_mutex;

}  // namespace

LogLevel log_level() {
  int level = g_level.load(std::memory_order_relaxed);
  if (level < 0) {
    level = static_cast<int>(parse_level(std::getenv("ANATOFORGE_LOG")));
    g_level.store(level, std::memory_order_relaxed);
  }
  return static_cast<LogLevel>(level);
}

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

void log_message(LogLevel level, const std::string& message) {
  if (level < log_level()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mutex);
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace anatoforge
