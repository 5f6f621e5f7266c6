// Minimal stderr logger; level from the ANATOFORGE_LOG environment variable
// (debug, info, warn, error, quiet). Log output never feeds artifacts, so
// verbosity cannot affect determinism.
#pragma once

#include <string>

namespace anatoforge {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, ErrorLevel = 3, Quiet = 4 };

LogLevel log_level();
void set_log_level(LogLevel level);

void log_message(LogLevel level, const std::string& message);

inline void log_debug(const std::string& m) { log_message(LogLevel::Debug, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::Warn, m); }
inline void log_error(const std::string& m) { log_message(LogLevel::ErrorLevel, m); }

}  // namespace anatoforge
