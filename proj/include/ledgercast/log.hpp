#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace ledgercast::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Level comes from LEDGERCAST_LOG (error|warn|info|debug), default warn.
inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("LEDGERCAST_LOG");
        if (!env) return Level::warn;
        if (std::strcmp(env, "error") == 0) return Level::error;
        if (std::strcmp(env, "warn") == 0) return Level::warn;
        if (std::strcmp(env, "info") == 0) return Level::info;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::warn;
    }();
    return lvl;
}

inline void emit(Level lvl, const char* tag, const std::string& msg) {
    if (static_cast<int>(lvl) <= static_cast<int>(threshold())) {
        std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
    }
}

inline void error(const std::string& msg) { emit(Level::error, "error", msg); }
inline void warn(const std::string& msg) { emit(Level::warn, "warn", msg); }
inline void info(const std::string& msg) { emit(Level::info, "info", msg); }
inline void debug(const std::string& msg) { emit(Level::debug, "debug", msg); }

} // namespace ledgercast::log
