#include "sns/log.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace sns {

namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::info)};

const char* level_tag(LogLevel level) {
    switch (level) {
    case LogLevel::error:
        return "ERROR";
    case LogLevel::info:
        return "INFO";
    case LogLevel::debug:
        return "DEBUG";
    }
    return "?";
}

} // namespace

std::optional<LogLevel> log_level_from_string(std::string_view s) {
    if (s == "error")
        return LogLevel::error;
    if (s == "info")
        return LogLevel::info;
    if (s == "debug")
        return LogLevel::debug;
    return std::nullopt;
}

void set_log_level(LogLevel level) {
    g_level.store(static_cast<int>(level), std::memory_order_relaxed);
}

LogLevel log_level() {
    return static_cast<LogLevel>(g_level.load(std::memory_order_relaxed));
}

void log(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > g_level.load(std::memory_order_relaxed))
        return;
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        now.time_since_epoch())
                        .count() %
                    1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[48];
    std::snprintf(stamp, sizeof stamp, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                  tm.tm_sec, static_cast<int>(ms));
    std::fprintf(stderr, "%s %-5s %s\n", stamp, level_tag(level), message.c_str());
}

} // namespace sns
