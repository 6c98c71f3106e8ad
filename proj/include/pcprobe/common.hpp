#ifndef PCPROBE_COMMON_HPP
#define PCPROBE_COMMON_HPP

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace pcprobe {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity from PROBE_LOG (error|warn|info|debug), read once.
inline LogLevel log_threshold() {
    static const LogLevel level = [] {
        const char* env = std::getenv("PROBE_LOG");
        if (!env) return LogLevel::Warn;
        const std::string s(env);
        if (s == "error") return LogLevel::Error;
        if (s == "warn") return LogLevel::Warn;
        if (s == "info") return LogLevel::Info;
        if (s == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log(LogLevel level, const std::string& msg) {
    if (level > log_threshold()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

} // namespace pcprobe

#endif
