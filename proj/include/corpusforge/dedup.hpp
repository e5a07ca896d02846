#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/suffix_array.hpp"

namespace corpusforge {

struct Document {
    std::string id;
    std::string text;

    bool operator==(const Document&) const = default;
};

// Documents concatenated with a sentinel byte between them so substring
// matches never span a document boundary. The sentinel cannot occur in
// well-formed UTF-8, and is rejected if present in any input document.
struct ConcatCorpus {
    static constexpr std::uint8_t kSentinel = 0xFF;

    std::vector<std::uint8_t> bytes;
    std::vector<std::uint32_t> doc_offsets;  // start offset per document, strictly increasing
    std::vector<std::string> doc_ids;
    std::vector<std::uint32_t> doc_lengths;

    static ConcatCorpus from_documents(const std::vector<Document>& docs);

    std::size_t doc_count() const { return doc_offsets.size(); }
    std::uint32_t doc_begin(std::size_t d) const { return doc_offsets[d]; }
    std::uint32_t doc_end(std::size_t d) const { return doc_offsets[d] + doc_lengths[d]; }
    std::string_view doc_text(std::size_t d) const;

    // Start offset of the document containing corpus position `pos`
    // (pos may also point at the separator following that document).
    std::uint32_t doc_begin_at(std::uint32_t pos) const;
};

enum class DedupMode { ExciseSpans, DropDocuments };
enum class KeepPolicy { KeepFirst };

struct DedupConfig {
    std::uint32_t dup_length_threshold = 75;  // bytes
    DedupMode mode = DedupMode::ExciseSpans;
    KeepPolicy keep_policy = KeepPolicy::KeepFirst;

    void validate() const;  // threshold >= 2, else ConfigError
};

// A maximal run of duplicate-covered bytes inside one document. A byte is
// covered when it lies inside a window of dup_length_threshold bytes whose
// content also occurs at a strictly earlier corpus offset (KeepFirst: the
// earliest occurrence of any repeat is exempt). match_count is the largest
// corpus-wide occurrence count among the windows merged into the span.
struct DuplicateSpan {
    std::string doc_id;
    std::uint32_t doc_index = 0;
    std::uint32_t start = 0;   // byte offset within the document
    std::uint32_t length = 0;  // bytes
    std::uint32_t match_count = 0;

    bool operator==(const DuplicateSpan&) const = default;
};

struct DedupReport {
    std::uint64_t spans_found = 0;
    std::uint64_t documents_dropped = 0;
    std::uint64_t characters_removed = 0;
    std::uint64_t documents_in = 0;
    std::uint64_t documents_out = 0;

    bool operator==(const DedupReport&) const = default;
};

struct DedupResult {
    std::vector<Document> documents;
    DedupReport report;
};

// Reports every duplicate-covered span at the given threshold, in document
// order, spans within a document in ascending start order.
std::vector<DuplicateSpan> find_duplicate_spans(const ConcatCorpus& corpus,
                                                const DedupConfig& config,
                                                Kernel kernel = Kernel::Auto);

// Deletes covered spans and repeats detection until no duplicates survive
// (excision can splice new ones). Documents left empty are dropped.
// characters_removed counts every excised byte.
DedupResult dedup_excise(const ConcatCorpus& corpus, const DedupConfig& config,
                         Kernel kernel = Kernel::Auto);

// Drops every document that shares a window of at least dup_length_threshold
// bytes with an earlier document. Matches within a single document never drop
// it, so the earliest occurrence's document always survives.
// characters_removed counts the bytes of dropped documents.
DedupResult dedup_drop_documents(const ConcatCorpus& corpus, const DedupConfig& config,
                                 Kernel kernel = Kernel::Auto);

// Fieldwise sum.
DedupReport dedup_report_merge(const std::vector<DedupReport>& reports);

}  // namespace corpusforge
