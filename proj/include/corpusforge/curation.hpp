#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/records.hpp"

namespace corpusforge {

// Sensitive-term list. Matching is case-insensitive (ASCII folding) at word
// boundaries: an occurrence counts only when the characters on both sides are
// not alphanumeric, so "slur1" never fires on "slur1ish". Terms may be
// multi-word phrases, matched literally after lowercasing.
struct Lexicon {
    enum class MatchPolicy { WordBoundary };

    std::vector<std::string> terms;  // lowercase, non-empty
    MatchPolicy match_policy = MatchPolicy::WordBoundary;

    // One term per line; blank lines and lines starting with '#' are skipped.
    static Lexicon load(const std::filesystem::path& path);
    static Lexicon from_terms(std::vector<std::string> raw_terms);

    bool empty() const { return terms.empty(); }
    bool matches(std::string_view text) const;
};

struct FilterOutcome {
    std::vector<CorpusRecord> kept;
    std::vector<CorpusRecord> removed;  // with filtered=true
    StageManifest manifest;             // stage_name "filter", counts filled
};

// Removes a record when any lexicon term matches its explanation or response
// text. An empty lexicon disables filtering (everything kept). Order is
// preserved on both sides of the partition.
FilterOutcome filter_sensitive(const std::vector<CorpusRecord>& records, const Lexicon& lexicon);

struct TextStats {
    std::uint64_t count = 0;
    bool defined = false;  // false when there were no texts
    double mean_words = 0.0;
    double std_words = 0.0;  // population form (n divisor)
    std::uint64_t min_words = 0;
    std::uint64_t max_words = 0;
    std::vector<std::uint64_t> histogram;  // bucket b counts texts with [10b, 10b+10) words
};

inline constexpr std::uint64_t kHistogramBucketWidth = 10;

// Words are maximal runs of non-whitespace bytes.
std::uint64_t word_count(std::string_view text);

TextStats word_stats(const std::vector<std::string>& texts);

ojson stats_to_json(const TextStats& stats);
std::string stats_histogram_csv(const TextStats& stats);

}  // namespace corpusforge
