#include "corpusforge/ids.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>

namespace corpusforge {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string iso8601_utc(std::int64_t unix_ms) {
    std::time_t secs = static_cast<std::time_t>(unix_ms / 1000);
    int millis = static_cast<int>(unix_ms % 1000);
    if (millis < 0) {
        millis += 1000;
        secs -= 1;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
    return buf;
}

namespace {

constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

// Logical epoch for deterministic runs: 2024-01-01T00:00:00Z.
constexpr std::int64_t kLogicalEpochMs = 1704067200000LL;

std::int64_t wall_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

UlidGenerator::UlidGenerator(bool deterministic, std::uint64_t seed, std::int64_t start_ms)
    : deterministic_(deterministic), rng_(seed), logical_ms_(start_ms) {}

UlidGenerator UlidGenerator::wall_clock() {
    std::random_device rd;
    std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    return UlidGenerator(false, seed, 0);
}

UlidGenerator UlidGenerator::deterministic(std::uint64_t seed) {
    return UlidGenerator(true, seed ^ 0x9e3779b97f4a7c15ULL, kLogicalEpochMs);
}

std::string UlidGenerator::next_id() {
    std::uint64_t time_ms;
    if (deterministic_) {
        time_ms = static_cast<std::uint64_t>(logical_ms_++);
    } else {
        time_ms = static_cast<std::uint64_t>(wall_ms());
    }
    std::uint64_t rand_hi = rng_();  // 16 bits used
    std::uint64_t rand_lo = rng_();  // 64 bits used

    // 128-bit layout: time(48) | rand_hi(16) | rand_lo(64), emitted as 26
    // base32 characters, most significant first (1 + 25 * 5 = 126 usable bits,
    // top character holds the 2 leading time bits' remainder like classic ULID).
    std::array<char, 26> out{};
    std::uint64_t hi = (time_ms << 16) | (rand_hi & 0xFFFF);  // 64 bits
    std::uint64_t lo = rand_lo;
    for (int i = 25; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kCrockford[lo & 0x1F];
        // 128-bit right shift by 5
        lo = (lo >> 5) | (hi << 59);
        hi >>= 5;
    }
    return std::string(out.data(), out.size());
}

std::string UlidGenerator::now_iso8601() const {
    return iso8601_utc(deterministic_ ? logical_ms_ : wall_ms());
}

}  // namespace corpusforge
