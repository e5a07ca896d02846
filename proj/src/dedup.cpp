#include "corpusforge/dedup.hpp"

#include <algorithm>
#include <cassert>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "corpusforge/errors.hpp"

namespace corpusforge {

namespace {

using u32 = std::uint32_t;
using u8 = std::uint8_t;

}  // namespace

ConcatCorpus ConcatCorpus::from_documents(const std::vector<Document>& docs) {
    ConcatCorpus corpus;
    std::size_t total = 0;
    for (const auto& doc : docs) {
        total += doc.text.size() + 1;
    }
    if (total >= static_cast<std::size_t>(UINT32_MAX)) {
        throw ValidationError("corpus too large for 32-bit offsets");
    }
    corpus.bytes.reserve(total);
    corpus.doc_offsets.reserve(docs.size());
    corpus.doc_ids.reserve(docs.size());
    corpus.doc_lengths.reserve(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto& doc = docs[d];
        if (doc.text.find(static_cast<char>(kSentinel)) != std::string::npos) {
            throw ValidationError("document '" + doc.id +
                                  "' contains the sentinel byte 0xFF; input must be UTF-8");
        }
        if (d > 0) {
            corpus.bytes.push_back(kSentinel);
        }
        corpus.doc_offsets.push_back(static_cast<u32>(corpus.bytes.size()));
        corpus.doc_lengths.push_back(static_cast<u32>(doc.text.size()));
        corpus.doc_ids.push_back(doc.id);
        corpus.bytes.insert(corpus.bytes.end(), doc.text.begin(), doc.text.end());
    }
    return corpus;
}

std::string_view ConcatCorpus::doc_text(std::size_t d) const {
    return std::string_view(reinterpret_cast<const char*>(bytes.data()) + doc_offsets[d],
                            doc_lengths[d]);
}

std::uint32_t ConcatCorpus::doc_begin_at(std::uint32_t pos) const {
    auto it = std::upper_bound(doc_offsets.begin(), doc_offsets.end(), pos);
    assert(it != doc_offsets.begin());
    return *(it - 1);
}

void DedupConfig::validate() const {
    if (dup_length_threshold < 2) {
        throw ConfigError("dup_length_threshold must be >= 2, got " +
                          std::to_string(dup_length_threshold));
    }
}

namespace {

// Shared detection pass. For every corpus position p whose window of T bytes
// repeats, marks the window start and records the corpus-wide occurrence
// count of that window:
//   cross_document_only = false: covered when an equal window starts at any
//     strictly earlier corpus offset (the per-group earliest stays exempt).
//   cross_document_only = true: covered only when the earliest equal window
//     lives in an earlier document (drop mode ignores self-matches).
struct CoverageMarks {
    std::vector<u8> covered_start;   // per corpus byte
    std::vector<u32> window_count;   // group size, set where covered_start
};

CoverageMarks mark_covered_windows(const ConcatCorpus& corpus, u32 threshold,
                                   bool cross_document_only, Kernel kernel) {
    const std::size_t n = corpus.bytes.size();
    CoverageMarks marks;
    marks.covered_start.assign(n, 0);
    marks.window_count.assign(n, 0);
    if (n == 0) {
        return marks;
    }

    const SuffixArray sx = build_suffix_array(
        std::span<const u8>(corpus.bytes.data(), corpus.bytes.size()), kernel);

    // Window validity per position: fits inside one document.
    std::vector<u8> valid(n, 0);
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        const u32 begin = corpus.doc_begin(d);
        const u32 end = corpus.doc_end(d);
        if (corpus.doc_lengths[d] >= threshold) {
            std::fill(valid.begin() + begin, valid.begin() + (end - threshold) + 1, u8{1});
        }
    }

    // Maximal runs of suffix-array entries whose adjacent LCP is >= threshold
    // are exactly the groups of equal windows. A run either consists entirely
    // of valid windows or entirely of windows touching a sentinel, because
    // all members share their first `threshold` bytes.
    std::vector<std::pair<u32, u32>> runs;
    {
        u32 run_start = 0;
        bool open = false;
        for (u32 i = 1; i < n; ++i) {
            if (sx.lcp[i] >= threshold) {
                if (!open) {
                    run_start = i - 1;
                    open = true;
                }
            } else if (open) {
                runs.emplace_back(run_start, i - 1);
                open = false;
            }
        }
        if (open) {
            runs.emplace_back(run_start, static_cast<u32>(n - 1));
        }
    }

    const auto process_run = [&](const std::pair<u32, u32>& run) {
        const u32 lo = run.first;
        const u32 hi = run.second;
        if (!valid[sx.sa[lo]]) {
            return;
        }
        u32 earliest = sx.sa[lo];
        for (u32 i = lo + 1; i <= hi; ++i) {
            earliest = std::min(earliest, sx.sa[i]);
        }
        const u32 count = hi - lo + 1;
        for (u32 i = lo; i <= hi; ++i) {
            const u32 p = sx.sa[i];
            const bool covered = cross_document_only ? (earliest < corpus.doc_begin_at(p))
                                                     : (p != earliest);
            if (covered) {
                marks.covered_start[p] = 1;
                marks.window_count[p] = count;
            }
        }
    };

#ifdef _OPENMP
    if (kernel != Kernel::Serial && runs.size() > 1) {
#pragma omp parallel for schedule(static)
        for (std::size_t r = 0; r < runs.size(); ++r) {
            process_run(runs[r]);
        }
    } else
#endif
    {
        for (const auto& run : runs) {
            process_run(run);
        }
    }
    return marks;
}

// Merges covered windows into maximal per-document byte spans.
std::vector<DuplicateSpan> spans_from_marks(const ConcatCorpus& corpus, u32 threshold,
                                            const CoverageMarks& marks) {
    std::vector<std::vector<DuplicateSpan>> per_doc(corpus.doc_count());

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        const u32 begin = corpus.doc_begin(d);
        const u32 end = corpus.doc_end(d);
        std::uint64_t reach = begin;  // first byte NOT covered by any seen window
        bool in_span = false;
        u32 span_start = 0;
        u32 span_count = 0;
        for (u32 b = begin; b < end; ++b) {
            if (marks.covered_start[b]) {
                reach = std::max<std::uint64_t>(reach, static_cast<std::uint64_t>(b) + threshold);
                span_count = std::max(span_count, marks.window_count[b]);
            }
            const bool covered = b < reach;
            if (covered && !in_span) {
                in_span = true;
                span_start = b;
            } else if (!covered && in_span) {
                per_doc[d].push_back({corpus.doc_ids[d], static_cast<u32>(d), span_start - begin,
                                      b - span_start, span_count});
                in_span = false;
                span_count = 0;
            }
        }
        if (in_span) {
            per_doc[d].push_back({corpus.doc_ids[d], static_cast<u32>(d), span_start - begin,
                                  std::min<u32>(end, static_cast<u32>(reach)) - span_start,
                                  span_count});
        }
    }

    std::vector<DuplicateSpan> spans;
    for (auto& ds : per_doc) {
        spans.insert(spans.end(), ds.begin(), ds.end());
    }
    return spans;
}

std::vector<Document> documents_of(const ConcatCorpus& corpus) {
    std::vector<Document> docs(corpus.doc_count());
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        docs[d] = {corpus.doc_ids[d], std::string(corpus.doc_text(d))};
    }
    return docs;
}

}  // namespace

std::vector<DuplicateSpan> find_duplicate_spans(const ConcatCorpus& corpus,
                                                const DedupConfig& config, Kernel kernel) {
    config.validate();
    const CoverageMarks marks =
        mark_covered_windows(corpus, config.dup_length_threshold, false, kernel);
    return spans_from_marks(corpus, config.dup_length_threshold, marks);
}

DedupResult dedup_excise(const ConcatCorpus& corpus, const DedupConfig& config, Kernel kernel) {
    config.validate();
    if (config.mode != DedupMode::ExciseSpans) {
        throw ConfigError("dedup_excise requires mode=ExciseSpans");
    }

    DedupResult result;
    result.report.documents_in = corpus.doc_count();

    std::vector<Document> working = documents_of(corpus);
    // Excision can splice two halves into a fresh duplicate, so detect and cut
    // again until the corpus is clean. Each round removes at least
    // dup_length_threshold bytes, which bounds the loop.
    while (true) {
        const ConcatCorpus current = ConcatCorpus::from_documents(working);
        const std::vector<DuplicateSpan> spans = find_duplicate_spans(current, config, kernel);
        if (spans.empty()) {
            break;
        }
        result.report.spans_found += spans.size();
        for (const auto& span : spans) {
            result.report.characters_removed += span.length;
        }
        // Spans arrive in document order, ascending within a document; erase
        // back-to-front so earlier offsets stay valid.
        for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
            working[it->doc_index].text.erase(it->start, it->length);
        }
    }

    for (auto& doc : working) {
        if (doc.text.empty()) {
            ++result.report.documents_dropped;
        } else {
            result.documents.push_back(std::move(doc));
        }
    }
    result.report.documents_out = result.documents.size();
    return result;
}

DedupResult dedup_drop_documents(const ConcatCorpus& corpus, const DedupConfig& config,
                                 Kernel kernel) {
    config.validate();
    if (config.mode != DedupMode::DropDocuments) {
        throw ConfigError("dedup_drop_documents requires mode=DropDocuments");
    }

    DedupResult result;
    result.report.documents_in = corpus.doc_count();

    const CoverageMarks marks =
        mark_covered_windows(corpus, config.dup_length_threshold, true, kernel);
    result.report.spans_found =
        spans_from_marks(corpus, config.dup_length_threshold, marks).size();

    std::vector<u8> dropped(corpus.doc_count(), 0);
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        const u32 begin = corpus.doc_begin(d);
        const u32 end = corpus.doc_end(d);
        for (u32 b = begin; b < end; ++b) {
            if (marks.covered_start[b]) {
                dropped[d] = 1;
                break;
            }
        }
    }

    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        if (dropped[d]) {
            ++result.report.documents_dropped;
            result.report.characters_removed += corpus.doc_lengths[d];
        } else {
            result.documents.push_back({corpus.doc_ids[d], std::string(corpus.doc_text(d))});
        }
    }
    result.report.documents_out = result.documents.size();
    return result;
}

DedupReport dedup_report_merge(const std::vector<DedupReport>& reports) {
    DedupReport merged;
    for (const auto& r : reports) {
        merged.spans_found += r.spans_found;
        merged.documents_dropped += r.documents_dropped;
        merged.characters_removed += r.characters_removed;
        merged.documents_in += r.documents_in;
        merged.documents_out += r.documents_out;
    }
    return merged;
}

}  // namespace corpusforge
