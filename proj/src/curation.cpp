#include "corpusforge/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "corpusforge/errors.hpp"

namespace corpusforge {

namespace {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string trimmed_line(std::string line) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
        line.pop_back();
    }
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) {
        ++b;
    }
    return line.substr(b);
}

}  // namespace

Lexicon Lexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open lexicon file '" + path.string() + "'");
    }
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
        std::string term = trimmed_line(std::move(line));
        if (term.empty() || term[0] == '#') {
            continue;
        }
        terms.push_back(std::move(term));
    }
    return from_terms(std::move(terms));
}

Lexicon Lexicon::from_terms(std::vector<std::string> raw_terms) {
    Lexicon lexicon;
    for (auto& term : raw_terms) {
        std::string folded = ascii_lower(trimmed_line(std::move(term)));
        if (folded.empty()) {
            throw ValidationError("lexicon contains an empty term");
        }
        lexicon.terms.push_back(std::move(folded));
    }
    return lexicon;
}

bool Lexicon::matches(std::string_view text) const {
    if (terms.empty()) {
        return false;
    }
    const std::string haystack = ascii_lower(text);
    for (const auto& term : terms) {
        std::size_t pos = 0;
        while ((pos = haystack.find(term, pos)) != std::string::npos) {
            const bool left_ok = pos == 0 || !word_char(haystack[pos - 1]);
            const std::size_t end = pos + term.size();
            const bool right_ok = end == haystack.size() || !word_char(haystack[end]);
            if (left_ok && right_ok) {
                return true;
            }
            ++pos;
        }
    }
    return false;
}

FilterOutcome filter_sensitive(const std::vector<CorpusRecord>& records, const Lexicon& lexicon) {
    std::vector<std::uint8_t> hit(records.size(), 0);
    if (!lexicon.empty()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::size_t i = 0; i < records.size(); ++i) {
            hit[i] = lexicon.matches(records[i].explanation.text) ||
                             lexicon.matches(records[i].response_text)
                         ? 1
                         : 0;
        }
    }

    FilterOutcome outcome;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (hit[i]) {
            CorpusRecord r = records[i];
            r.filtered = true;
            outcome.removed.push_back(std::move(r));
        } else {
            outcome.kept.push_back(records[i]);
        }
    }
    outcome.manifest.stage_name = "filter";
    outcome.manifest.input_count = records.size();
    outcome.manifest.output_count = outcome.kept.size();
    outcome.manifest.removed_count = outcome.removed.size();
    outcome.manifest.validate();
    return outcome;
}

std::uint64_t word_count(std::string_view text) {
    std::uint64_t count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) {
            ++count;
        }
        in_word = !space;
    }
    return count;
}

TextStats word_stats(const std::vector<std::string>& texts) {
    TextStats stats;
    stats.count = texts.size();
    if (texts.empty()) {
        return stats;
    }
    stats.defined = true;

    const std::size_t n = texts.size();
    std::vector<std::uint64_t> counts(n);
    // Integer accumulators keep the result independent of summation order.
    std::uint64_t sum = 0;
    std::uint64_t sum_sq = 0;
    std::uint64_t min_w = UINT64_MAX;
    std::uint64_t max_w = 0;

#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : sum, sum_sq) reduction(min : min_w) \
    reduction(max : max_w)
#endif
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t w = word_count(texts[i]);
        counts[i] = w;
        sum += w;
        sum_sq += w * w;
        min_w = std::min(min_w, w);
        max_w = std::max(max_w, w);
    }

    stats.min_words = min_w;
    stats.max_words = max_w;
    stats.mean_words = static_cast<double>(sum) / static_cast<double>(n);
    const double mean_sq = static_cast<double>(sum_sq) / static_cast<double>(n);
    stats.std_words = std::sqrt(std::max(0.0, mean_sq - stats.mean_words * stats.mean_words));

    stats.histogram.assign(static_cast<std::size_t>(max_w / kHistogramBucketWidth) + 1, 0);
    for (std::uint64_t w : counts) {
        ++stats.histogram[static_cast<std::size_t>(w / kHistogramBucketWidth)];
    }
    return stats;
}

ojson stats_to_json(const TextStats& stats) {
    ojson buckets = ojson::array();
    for (std::size_t b = 0; b < stats.histogram.size(); ++b) {
        buckets.push_back(ojson{{"lo", b * kHistogramBucketWidth},
                                {"hi", (b + 1) * kHistogramBucketWidth},
                                {"count", stats.histogram[b]}});
    }
    return ojson{{"schema_version", kSchemaVersion},
                 {"count", stats.count},
                 {"defined", stats.defined},
                 {"mean_words", stats.mean_words},
                 {"std_words", stats.std_words},
                 {"min_words", stats.min_words},
                 {"max_words", stats.max_words},
                 {"histogram", buckets}};
}

std::string stats_histogram_csv(const TextStats& stats) {
    std::string csv = "bucket_lo,bucket_hi,count\n";
    for (std::size_t b = 0; b < stats.histogram.size(); ++b) {
        csv += std::to_string(b * kHistogramBucketWidth) + "," +
               std::to_string((b + 1) * kHistogramBucketWidth) + "," +
               std::to_string(stats.histogram[b]) + "\n";
    }
    return csv;
}

}  // namespace corpusforge
