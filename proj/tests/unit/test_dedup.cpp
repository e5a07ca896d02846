#include <doctest.h>

#include <random>

#include "corpusforge/dedup.hpp"
#include "corpusforge/errors.hpp"
#include "support/oracles.hpp"

using namespace corpusforge;
namespace ct = corpusforge::testing;

namespace {

std::vector<Document> docs(std::initializer_list<std::string> texts) {
    std::vector<Document> out;
    int i = 0;
    for (const auto& t : texts) {
        out.push_back({"doc" + std::to_string(i++), t});
    }
    return out;
}

DedupConfig config_for(std::uint32_t threshold, DedupMode mode) {
    DedupConfig config;
    config.dup_length_threshold = threshold;
    config.mode = mode;
    return config;
}

}  // namespace

TEST_CASE("concat corpus layout and sentinel rejection") {
    const auto corpus = ConcatCorpus::from_documents(docs({"abc", "", "de"}));
    REQUIRE(corpus.doc_count() == 3);
    CHECK(corpus.doc_begin(0) == 0);
    CHECK(corpus.doc_begin(1) == 4);
    CHECK(corpus.doc_begin(2) == 5);
    CHECK(corpus.doc_text(0) == "abc");
    CHECK(corpus.doc_text(1) == "");
    CHECK(corpus.doc_text(2) == "de");

    std::vector<Document> bad = docs({"ok"});
    bad[0].text += static_cast<char>(0xFF);
    CHECK_THROWS_AS(ConcatCorpus::from_documents(bad), ValidationError);
}

TEST_CASE("threshold below 2 is a config error") {
    const auto corpus = ConcatCorpus::from_documents(docs({"abcabc"}));
    CHECK_THROWS_AS(find_duplicate_spans(corpus, config_for(1, DedupMode::ExciseSpans)),
                    ConfigError);
}

TEST_CASE("shared five byte block across two documents") {
    const auto input = docs({"xxABCDEyy", "zzABCDEww"});
    const auto corpus = ConcatCorpus::from_documents(input);

    // Threshold 5: only the second occurrence is reported.
    auto spans = find_duplicate_spans(corpus, config_for(5, DedupMode::ExciseSpans));
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].doc_index == 1);
    CHECK(spans[0].start == 2);
    CHECK(spans[0].length == 5);
    CHECK(spans[0].match_count == 2);
    CHECK(spans == ct::oracle_duplicate_spans(input, 5));

    // Threshold 6: the longest shared substring is 5, so nothing is reported.
    CHECK(find_duplicate_spans(corpus, config_for(6, DedupMode::ExciseSpans)).empty());
    CHECK(ct::oracle_duplicate_spans(input, 6).empty());
}

TEST_CASE("self repetition merges into one span leaving the uncovered prefix") {
    const auto input = docs({"aaaaaaaa"});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto spans = find_duplicate_spans(corpus, config_for(3, DedupMode::ExciseSpans));
    const auto expected = ct::oracle_duplicate_spans(input, 3);
    REQUIRE(spans.size() == 1);
    CHECK(spans == expected);
    CHECK(spans[0].start == 1);
    CHECK(spans[0].length == 7);

    const auto excised = dedup_excise(corpus, config_for(3, DedupMode::ExciseSpans));
    REQUIRE(excised.documents.size() == 1);
    CHECK(excised.documents[0].text == "a");
}

TEST_CASE("excise removes an identical later document entirely") {
    // A 100-byte block with no repeated 50-byte window of its own.
    std::mt19937_64 rng(5);
    std::string block(100, ' ');
    for (auto& c : block) {
        c = static_cast<char>('a' + rng() % 26);
    }
    const auto input = docs({block, block});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto result = dedup_excise(corpus, config_for(50, DedupMode::ExciseSpans));

    REQUIRE(result.documents.size() == 1);
    CHECK(result.documents[0].id == "doc0");
    CHECK(result.documents[0].text == block);
    CHECK(result.report.characters_removed == 100);
    CHECK(result.report.documents_dropped == 1);
    CHECK(result.report.documents_in == 2);
    CHECK(result.report.documents_out == 1);
}

TEST_CASE("excise on duplicate-free input is the identity") {
    const auto input = docs({"completely distinct", "another unrelated text"});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto result = dedup_excise(corpus, config_for(8, DedupMode::ExciseSpans));
    CHECK(result.documents == input);
    CHECK(result.report.spans_found == 0);
    CHECK(result.report.characters_removed == 0);
    CHECK(result.report.documents_dropped == 0);
}

TEST_CASE("shared boilerplate prefix is excised from later documents") {
    const std::string boilerplate(75, 'B');
    const auto input =
        docs({boilerplate + "first tail", boilerplate + "second tail", boilerplate + "third"});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto result = dedup_excise(corpus, config_for(75, DedupMode::ExciseSpans));

    REQUIRE(result.documents.size() == 3);
    CHECK(result.documents[0].text == boilerplate + "first tail");
    CHECK(result.documents[1].text == "second tail");
    CHECK(result.documents[2].text == "third");
    CHECK(result.report.characters_removed == 150);
}

TEST_CASE("drop mode keeps the first of three identical stories") {
    const std::string story = "the same story told three times over and over";
    const auto input = docs({story, story, story});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto result = dedup_drop_documents(corpus, config_for(10, DedupMode::DropDocuments));

    REQUIRE(result.documents.size() == 1);
    CHECK(result.documents[0].id == "doc0");
    CHECK(result.report.documents_dropped == 2);
    CHECK(result.report.documents_in == 3);
    CHECK(result.report.documents_out == 1);
    CHECK(result.report.characters_removed == 2 * story.size());
}

TEST_CASE("drop mode leaves short unique documents alone") {
    const auto input = docs({"tiny", "wee", "small"});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto result = dedup_drop_documents(corpus, config_for(10, DedupMode::DropDocuments));
    CHECK(result.documents == input);
    CHECK(result.report.documents_dropped == 0);
}

TEST_CASE("drop mode ignores repeats within a single document") {
    // Internal self-repetition must not drop the earliest occurrence's
    // document; only cross-document sharing does.
    const auto input = docs({"abcabcabc", "unrelated text here", "xyzabcabcabcxyz"});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto result = dedup_drop_documents(corpus, config_for(3, DedupMode::DropDocuments));

    REQUIRE(result.documents.size() == 2);
    CHECK(result.documents[0].id == "doc0");
    CHECK(result.documents[1].id == "doc1");
}

TEST_CASE("mode mismatch is a config error") {
    const auto corpus = ConcatCorpus::from_documents(docs({"abc"}));
    CHECK_THROWS_AS(dedup_excise(corpus, config_for(5, DedupMode::DropDocuments)), ConfigError);
    CHECK_THROWS_AS(dedup_drop_documents(corpus, config_for(5, DedupMode::ExciseSpans)),
                    ConfigError);
}

TEST_CASE("report merge sums fieldwise") {
    CHECK(dedup_report_merge({}) == DedupReport{});
    const DedupReport r1{3, 1, 40, 10, 9};
    CHECK(dedup_report_merge({r1}) == r1);
    const DedupReport r2{2, 0, 15, 9, 9};
    const DedupReport merged = dedup_report_merge({r1, r2});
    CHECK(merged.spans_found == 5);
    CHECK(merged.documents_dropped == 1);
    CHECK(merged.characters_removed == 55);
    CHECK(merged.documents_in == 19);
    CHECK(merged.documents_out == 18);
}

TEST_CASE("random corpora match the brute-force oracle") {
    std::mt19937_64 rng(1234);
    ct::RandomCorpusOptions options;
    options.max_total_bytes = 600;
    for (int trial = 0; trial < 150; ++trial) {
        const auto input = ct::random_corpus(rng, options);
        const std::uint32_t threshold = 2 + static_cast<std::uint32_t>(rng() % 7);
        const auto corpus = ConcatCorpus::from_documents(input);

        const auto expected = ct::oracle_duplicate_spans(input, threshold);
        const auto actual =
            find_duplicate_spans(corpus, config_for(threshold, DedupMode::ExciseSpans));
        REQUIRE(actual == expected);
    }
}

TEST_CASE("excise reaches a duplicate-free fixpoint on random corpora") {
    std::mt19937_64 rng(5678);
    ct::RandomCorpusOptions options;
    options.max_total_bytes = 500;
    for (int trial = 0; trial < 80; ++trial) {
        const auto input = ct::random_corpus(rng, options);
        const std::uint32_t threshold = 2 + static_cast<std::uint32_t>(rng() % 7);
        const auto config = config_for(threshold, DedupMode::ExciseSpans);

        const auto result = dedup_excise(ConcatCorpus::from_documents(input), config);
        const auto respanned =
            find_duplicate_spans(ConcatCorpus::from_documents(result.documents), config);
        CHECK(respanned.empty());
        CHECK(ct::oracle_duplicate_spans(result.documents, threshold).empty());

        // Conservation and report consistency.
        CHECK(result.report.documents_in == input.size());
        CHECK(result.report.documents_out == result.documents.size());
        CHECK(result.report.documents_in ==
              result.report.documents_out + result.report.documents_dropped);
    }
}

TEST_CASE("drop mode matches the cross-document oracle on random corpora") {
    std::mt19937_64 rng(91011);
    ct::RandomCorpusOptions options;
    options.max_total_bytes = 500;
    for (int trial = 0; trial < 80; ++trial) {
        const auto input = ct::random_corpus(rng, options);
        const std::uint32_t threshold = 2 + static_cast<std::uint32_t>(rng() % 7);

        const auto dropped = ct::oracle_dropped_documents(input, threshold);
        const auto result = dedup_drop_documents(ConcatCorpus::from_documents(input),
                                                 config_for(threshold, DedupMode::DropDocuments));

        std::vector<Document> expected_kept;
        std::uint64_t expected_chars = 0;
        for (std::size_t d = 0; d < input.size(); ++d) {
            if (dropped[d]) {
                expected_chars += input[d].text.size();
            } else {
                expected_kept.push_back(input[d]);
            }
        }
        CHECK(result.documents == expected_kept);
        CHECK(result.report.documents_dropped == input.size() - expected_kept.size());
        CHECK(result.report.characters_removed == expected_chars);
    }
}

TEST_CASE("detection is deterministic across kernels and repeat runs") {
    std::mt19937_64 rng(222);
    ct::RandomCorpusOptions options;
    options.max_total_bytes = 2000;
    for (int trial = 0; trial < 10; ++trial) {
        const auto input = ct::random_corpus(rng, options);
        const std::uint32_t threshold = 2 + static_cast<std::uint32_t>(rng() % 7);
        const auto corpus = ConcatCorpus::from_documents(input);
        const auto config = config_for(threshold, DedupMode::ExciseSpans);

        const auto serial = find_duplicate_spans(corpus, config, Kernel::Serial);
        const auto parallel = find_duplicate_spans(corpus, config, Kernel::Parallel);
        const auto again = find_duplicate_spans(corpus, config, Kernel::Parallel);
        CHECK(serial == parallel);
        CHECK(parallel == again);

        const auto excise_serial = dedup_excise(corpus, config, Kernel::Serial);
        const auto excise_parallel = dedup_excise(corpus, config, Kernel::Parallel);
        CHECK(excise_serial.documents == excise_parallel.documents);
        CHECK(excise_serial.report == excise_parallel.report);
    }
}

TEST_CASE("no span crosses the sentinel even when document contents abut") {
    // "ab|ab" as two documents: the shared window is detected per document,
    // never across the separator.
    const auto input = docs({"abab", "abab"});
    const auto corpus = ConcatCorpus::from_documents(input);
    const auto spans = find_duplicate_spans(corpus, config_for(4, DedupMode::ExciseSpans));
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].doc_index == 1);
    CHECK(spans[0].start == 0);
    CHECK(spans[0].length == 4);
    CHECK(spans == ct::oracle_duplicate_spans(input, 4));
}

TEST_CASE("raising the threshold never covers more characters") {
    // Monotonicity holds for one detection pass: every byte covered at
    // threshold T+1 is covered at T. (The iterated excise total can wobble by
    // a few bytes because each threshold re-splices text differently, so the
    // property is asserted on detection coverage.)
    std::mt19937_64 rng(333);
    ct::RandomCorpusOptions options;
    options.max_total_bytes = 400;
    for (int trial = 0; trial < 40; ++trial) {
        const auto input = ct::random_corpus(rng, options);
        const auto corpus = ConcatCorpus::from_documents(input);
        std::uint64_t previous = UINT64_MAX;
        for (std::uint32_t threshold = 2; threshold <= 8; ++threshold) {
            const auto spans =
                find_duplicate_spans(corpus, config_for(threshold, DedupMode::ExciseSpans));
            std::uint64_t covered = 0;
            for (const auto& span : spans) {
                covered += span.length;
            }
            CHECK(covered <= previous);
            previous = covered;
        }
    }
}
