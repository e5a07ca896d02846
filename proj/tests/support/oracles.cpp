#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>
#include <unistd.h>

namespace corpusforge::testing {

SuffixArray naive_suffix_array(std::string_view text) {
    const std::size_t n = text.size();
    SuffixArray result;
    result.sa.resize(n);
    std::iota(result.sa.begin(), result.sa.end(), 0);
    std::sort(result.sa.begin(), result.sa.end(), [&](std::uint32_t a, std::uint32_t b) {
        return text.substr(a) < text.substr(b);  // char_traits compares as unsigned char
    });
    result.lcp.assign(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
        const std::string_view prev = text.substr(result.sa[i - 1]);
        const std::string_view curr = text.substr(result.sa[i]);
        std::size_t k = 0;
        while (k < prev.size() && k < curr.size() && prev[k] == curr[k]) {
            ++k;
        }
        result.lcp[i] = static_cast<std::uint32_t>(k);
    }
    return result;
}

namespace {

struct WindowRef {
    std::size_t doc = 0;
    std::size_t offset = 0;
};

bool windows_equal(const std::vector<Document>& docs, const WindowRef& a, const WindowRef& b,
                   std::uint32_t threshold) {
    return std::memcmp(docs[a.doc].text.data() + a.offset, docs[b.doc].text.data() + b.offset,
                       threshold) == 0;
}

std::vector<WindowRef> all_windows(const std::vector<Document>& docs, std::uint32_t threshold) {
    std::vector<WindowRef> windows;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (docs[d].text.size() < threshold) {
            continue;
        }
        for (std::size_t off = 0; off + threshold <= docs[d].text.size(); ++off) {
            windows.push_back({d, off});
        }
    }
    return windows;
}

}  // namespace

std::vector<DuplicateSpan> oracle_duplicate_spans(const std::vector<Document>& docs,
                                                  std::uint32_t threshold) {
    const std::vector<WindowRef> windows = all_windows(docs, threshold);

    // covered[a]: some window with a smaller corpus offset has equal bytes.
    // Window order in `windows` is already corpus order.
    std::vector<std::uint8_t> covered(windows.size(), 0);
    std::vector<std::uint32_t> count(windows.size(), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (std::size_t a = 0; a < windows.size(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            if (windows_equal(docs, windows[a], windows[b], threshold)) {
                covered[a] = 1;
                break;
            }
        }
        if (covered[a]) {
            std::uint32_t c = 0;
            for (std::size_t b = 0; b < windows.size(); ++b) {
                if (windows_equal(docs, windows[a], windows[b], threshold)) {
                    ++c;
                }
            }
            count[a] = c;
        }
    }

    std::vector<DuplicateSpan> spans;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const std::size_t len = docs[d].text.size();
        std::vector<std::uint8_t> byte_covered(len, 0);
        std::vector<std::uint32_t> start_count(len, 0);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            if (windows[w].doc != d || !covered[w]) {
                continue;
            }
            start_count[windows[w].offset] = count[w];
            for (std::size_t b = windows[w].offset; b < windows[w].offset + threshold; ++b) {
                byte_covered[b] = 1;
            }
        }
        std::size_t b = 0;
        while (b < len) {
            if (!byte_covered[b]) {
                ++b;
                continue;
            }
            const std::size_t start = b;
            std::uint32_t match = 0;
            while (b < len && byte_covered[b]) {
                match = std::max(match, start_count[b]);
                ++b;
            }
            spans.push_back({docs[d].id, static_cast<std::uint32_t>(d),
                             static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(b - start),
                             match});
        }
    }
    return spans;
}

std::vector<bool> oracle_dropped_documents(const std::vector<Document>& docs,
                                           std::uint32_t threshold) {
    std::vector<bool> dropped(docs.size(), false);
    for (std::size_t j = 1; j < docs.size(); ++j) {
        const std::string& text = docs[j].text;
        if (text.size() < threshold) {
            continue;
        }
        bool hit = false;
        for (std::size_t i = 0; i < j && !hit; ++i) {
            const std::string& earlier = docs[i].text;
            if (earlier.size() < threshold) {
                continue;
            }
            for (std::size_t a = 0; a + threshold <= text.size() && !hit; ++a) {
                for (std::size_t b = 0; b + threshold <= earlier.size(); ++b) {
                    if (std::memcmp(text.data() + a, earlier.data() + b, threshold) == 0) {
                        hit = true;
                        break;
                    }
                }
            }
        }
        dropped[j] = hit;
    }
    return dropped;
}

std::vector<Document> random_corpus(std::mt19937_64& rng, const RandomCorpusOptions& options) {
    const int alphabet =
        options.alphabet_min +
        static_cast<int>(rng() % static_cast<std::uint64_t>(options.alphabet_max -
                                                            options.alphabet_min + 1));
    const int doc_count = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(options.max_docs));
    std::size_t budget = options.max_total_bytes;

    std::vector<Document> docs;
    docs.reserve(static_cast<std::size_t>(doc_count));
    for (int d = 0; d < doc_count; ++d) {
        const std::size_t cap = budget / static_cast<std::size_t>(doc_count - d);
        const std::size_t size = cap == 0 ? 0 : rng() % (cap + 1);
        budget -= size;
        std::string text(size, 'a');
        for (auto& c : text) {
            c = static_cast<char>('a' + rng() % static_cast<std::uint64_t>(alphabet));
        }
        docs.push_back({"doc" + std::to_string(d), std::move(text)});
    }
    return docs;
}

double ScoreMultiset::mean() const {
    return static_cast<double>(n1 + 2 * n2) / static_cast<double>(n());
}

double ScoreMultiset::stddev() const {
    const double m = mean();
    const double mean_sq = static_cast<double>(n1 + 4 * n2) / static_cast<double>(n());
    return std::sqrt(std::max(0.0, mean_sq - m * m));
}

std::vector<double> ScoreMultiset::expand() const {
    std::vector<double> values;
    values.reserve(n());
    values.insert(values.end(), n0, 0.0);
    values.insert(values.end(), n1, 1.0);
    values.insert(values.end(), n2, 2.0);
    return values;
}

ScoreMultiset find_score_multiset(double target_mean, double target_std, std::uint64_t n) {
    ScoreMultiset best;
    double best_err = 1e18;
    for (std::uint64_t n2 = 0; n2 <= n / 2; ++n2) {
        const std::int64_t base_n1 =
            static_cast<std::int64_t>(std::llround(target_mean * static_cast<double>(n))) -
            2 * static_cast<std::int64_t>(n2);
        for (std::int64_t delta = -1; delta <= 1; ++delta) {
            const std::int64_t n1 = base_n1 + delta;
            if (n1 < 0 || static_cast<std::uint64_t>(n1) + n2 > n) {
                continue;
            }
            ScoreMultiset candidate{n - static_cast<std::uint64_t>(n1) - n2,
                                    static_cast<std::uint64_t>(n1), n2};
            const double err = std::max(std::abs(candidate.mean() - target_mean),
                                        std::abs(candidate.stddev() - target_std));
            if (err < best_err) {
                best_err = err;
                best = candidate;
            }
        }
    }
    if (best.n() == 0) {
        throw std::runtime_error("no score multiset found");
    }
    return best;
}

TempDir::TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "corpusforge_test_XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

CliResult run_cli(const std::string& args, const std::filesystem::path& workdir) {
    const std::filesystem::path out = workdir / "cli_stdout.txt";
    const std::filesystem::path err = workdir / "cli_stderr.txt";
    const std::string command = std::string(CORPUSFORGE_CLI_PATH) + " " + args + " > " +
                                out.string() + " 2> " + err.string();
    const int status = std::system(command.c_str());

    CliResult result;
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    }
    result.out = read_file(out);
    result.err = read_file(err);
    return result;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace corpusforge::testing
