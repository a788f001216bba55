#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlm {

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Errors. Each named failure mode gets its own type so callers and tests can
// catch exactly what they expect.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedPcapHeader : Error { using Error::Error; };
struct TruncatedFrame : Error { using Error::Error; };
struct UnsupportedLinkType : Error { using Error::Error; };

struct MalformedLine : Error {
    MalformedLine(std::size_t line_no, const std::string& reason)
        : Error("line " + std::to_string(line_no) + ": " + reason), line_no(line_no) {}
    std::size_t line_no;
};

struct ClassTooSmall : Error {
    explicit ClassTooSmall(const std::string& label)
        : Error("class '" + label + "' has fewer than 2 sessions"), label(label) {}
    std::string label;
};

struct EmptyView : Error { using Error::Error; };
struct RangeOutOfBounds : Error { using Error::Error; };
struct KindMismatch : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct InvalidProfile : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Deterministic randomness. mt19937_64 is bit-exact across platforms; the
// std distributions are not, so draws go through these helpers instead.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for deriving stream keys.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Key for an independent stream identified by (seed, a, b); used by the synth
// generator (seed, class, session) and by per-component seed derivation.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(mix64(seed) ^ a) ^ b);
}

// Uniform in [0, 1) with 53 random bits.
inline double unit_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant at our scales,
// and unlike uniform_int_distribution the result is platform-stable.
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}

inline std::uint8_t random_byte(Rng& rng) {
    return static_cast<std::uint8_t>(rng() & 0xff);
}

// ---------------------------------------------------------------------------
// Logging: level from TLM_LOG (debug|info|warn|error), default warn.
// ---------------------------------------------------------------------------

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("TLM_LOG");
        if (!env) return LogLevel::Warn;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        if (v == "error") return LogLevel::Error;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log(LogLevel level, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (level >= log_level()) {
        std::fprintf(stderr, "[tlm %s] %s\n", names[static_cast<int>(level)], msg.c_str());
    }
}

inline void log_debug(const std::string& msg) { log(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::Warn, msg); }

}  // namespace tlm
