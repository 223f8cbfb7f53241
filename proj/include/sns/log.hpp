#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <string_view>

namespace sns {

enum class LogLevel : int { error = 0, info = 1, debug = 2 };

std::optional<LogLevel> log_level_from_string(std::string_view s);

void set_log_level(LogLevel level);
LogLevel log_level();

// One timestamped line to stderr when the level is enabled.
void log(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log(LogLevel::error, m); }
inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::debug, m); }

} // namespace sns
