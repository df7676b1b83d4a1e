#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace kmtpe {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Verbosity is read once from the KMTPE_LOG environment variable
/// ({error, info, debug}); unknown values fall back to "error".
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("KMTPE_LOG");
        if (!env) return LogLevel::error;
        std::string v(env);
        if (v == "debug") return LogLevel::debug;
        if (v == "info") return LogLevel::info;
        return LogLevel::error;
    }();
    return level;
}

inline void log_line(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const char* tag = lvl == LogLevel::error ? "error" : lvl == LogLevel::info ? "info" : "debug";
    std::cerr << "[kmtpe:" << tag << "] " << msg << '\n';
}

inline void log_info(const std::string& msg) { log_line(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_line(LogLevel::debug, msg); }
inline void log_error(const std::string& msg) { log_line(LogLevel::error, msg); }

}  // namespace kmtpe
