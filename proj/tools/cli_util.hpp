#ifndef QMCMET_CLI_UTIL_HPP
#define QMCMET_CLI_UTIL_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace cli {

// Thrown by subcommand bodies; main() prints the message as a single
// stderr line and exits with the code (2 validation, 3 runtime).
struct CliExit {
    int code;
    std::string message;
};

[[noreturn]] inline void fail(int code, std::string message) {
    throw CliExit{code, std::move(message)};
}

// Shortest round-trip decimal form, locale independent. All numbers that
// reach stdout or an SVG go through here or fmt_fixed so repeat runs are
// byte-identical.
inline std::string fmt_g(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::string fmt_fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

inline std::string fmt_sig(double v, int digits) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

}  // namespace cli

#endif
