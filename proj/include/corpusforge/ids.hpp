#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace corpusforge {

// FNV-1a, used for config hashes and the deterministic mock. Stable across
// platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Formats a millisecond unix timestamp as ISO-8601 UTC ("2024-01-01T00:00:00.000Z").
std::string iso8601_utc(std::int64_t unix_ms);

// ULID-style 26-character Crockford base32 ids: 48-bit timestamp + 80-bit
// randomness. Ids are content-independent so that duplicate records keep
// distinct identities through dedup reporting.
//
// Two modes:
//  - wall_clock(): real time + nondeterministic randomness.
//  - deterministic(seed): a fixed logical clock and a seeded RNG, so that
//    mock pipeline runs are byte-reproducible. The logical clock starts at a
//    fixed epoch and advances one millisecond per issued id.
class UlidGenerator {
public:
    static UlidGenerator wall_clock();
    static UlidGenerator deterministic(std::uint64_t seed);

    std::string next_id();

    // Current time on this generator's clock (logical in deterministic mode).
    std::string now_iso8601() const;

private:
    UlidGenerator(bool deterministic, std::uint64_t seed, std::int64_t start_ms);

    bool deterministic_;
    std::mt19937_64 rng_;
    std::int64_t logical_ms_;
};

}  // namespace corpusforge
