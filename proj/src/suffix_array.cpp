#include "corpusforge/suffix_array.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace corpusforge {

namespace {

using u32 = std::uint32_t;
using u8 = std::uint8_t;

constexpr std::size_t kParallelCutoff = 1u << 17;

// ---------------------------------------------------------------------------
// Serial reference kernels.
// ---------------------------------------------------------------------------

// Stable counting sort of `in` by key[item]; keys must be < bucket_count.
void counting_sort(const std::vector<u32>& in, std::vector<u32>& out, const std::vector<u32>& key,
                   u32 bucket_count, std::vector<u32>& counts) {
    counts.assign(bucket_count + 1, 0);
    for (u32 item : in) {
        ++counts[key[item] + 1];
    }
    for (u32 b = 1; b <= bucket_count; ++b) {
        counts[b] += counts[b - 1];
    }
    for (u32 item : in) {
        out[counts[key[item]]++] = item;
    }
}

std::vector<u32> build_sa_serial(std::span<const u8> text) {
    const std::size_t n = text.size();
    std::vector<u32> sa(n);
    std::vector<u32> rank(n);
    std::vector<u32> counts;

    // Initial sort by first byte; ranks are 1-based so 0 can mean "past end".
    counts.assign(257, 0);
    for (u8 c : text) {
        ++counts[static_cast<u32>(c) + 1];
    }
    for (u32 b = 1; b <= 256; ++b) {
        counts[b] += counts[b - 1];
    }
    for (u32 i = 0; i < n; ++i) {
        sa[counts[text[i]]++] = i;
    }
    u32 distinct = 0;
    for (u32 i = 0; i < n; ++i) {
        if (i == 0 || text[sa[i]] != text[sa[i - 1]]) {
            ++distinct;
        }
        rank[sa[i]] = distinct;
    }

    std::vector<u32> key2(n);
    std::vector<u32> by_key2(n);
    std::vector<u32> new_rank(n);
    std::vector<u32> ident(n);
    std::iota(ident.begin(), ident.end(), 0);

    for (std::size_t h = 1; distinct < n; h *= 2) {
        for (std::size_t i = 0; i < n; ++i) {
            key2[i] = (i + h < n) ? rank[i + h] : 0;
        }
        // Stable LSD: sort every position by key2, then by rank.
        counting_sort(ident, by_key2, key2, distinct + 1, counts);
        counting_sort(by_key2, sa, rank, distinct + 1, counts);

        u32 next = 0;
        for (u32 i = 0; i < n; ++i) {
            if (i == 0 || rank[sa[i]] != rank[sa[i - 1]] || key2[sa[i]] != key2[sa[i - 1]]) {
                ++next;
            }
            new_rank[sa[i]] = next;
        }
        rank.swap(new_rank);
        distinct = next;
    }
    return sa;
}

// Kasai's algorithm over a text position range. Starting h at zero instead of
// carrying it in from the previous position is always a valid lower bound, so
// the same routine serves both the serial pass, and parallel chunks that each
// start cold.
void kasai_range(std::span<const u8> text, const std::vector<u32>& sa,
                 const std::vector<u32>& rank_of, std::vector<u32>& lcp, std::size_t lo,
                 std::size_t hi) {
    const std::size_t n = text.size();
    std::size_t h = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        if (h > 0) {
            --h;
        }
        const u32 r = rank_of[i];
        if (r == 0) {
            h = 0;
            continue;
        }
        const std::size_t j = sa[r - 1];
        while (i + h < n && j + h < n && text[i + h] == text[j + h]) {
            ++h;
        }
        lcp[r] = static_cast<u32>(h);
    }
}

std::vector<u32> build_lcp_serial(std::span<const u8> text, const std::vector<u32>& sa) {
    const std::size_t n = text.size();
    std::vector<u32> lcp(n, 0);
    std::vector<u32> rank_of(n);
    for (u32 i = 0; i < n; ++i) {
        rank_of[sa[i]] = i;
    }
    kasai_range(text, sa, rank_of, lcp, 0, n);
    return lcp;
}

#ifdef _OPENMP

// ---------------------------------------------------------------------------
// OpenMP kernels. Work is split into fixed index blocks (never schedule
// dependent), so intermediate orders match the serial path exactly.
// ---------------------------------------------------------------------------

constexpr u32 kRadixBits = 16;
constexpr u32 kRadixBuckets = 1u << kRadixBits;

// One stable scatter pass over a 16-bit digit of key[item], with per-thread
// histograms laid out so the exclusive scan reproduces serial placement.
void radix_pass_parallel(const std::vector<u32>& in, std::vector<u32>& out,
                         const std::vector<u32>& key, u32 shift, int threads,
                         std::vector<u32>& hist) {
    const std::size_t n = in.size();
    const std::size_t block = (n + threads - 1) / threads;
    hist.assign(static_cast<std::size_t>(threads) * kRadixBuckets, 0);

#pragma omp parallel num_threads(threads)
    {
        const int t = omp_get_thread_num();
        const std::size_t lo = std::min(n, static_cast<std::size_t>(t) * block);
        const std::size_t hi = std::min(n, lo + block);
        u32* h = hist.data() + static_cast<std::size_t>(t) * kRadixBuckets;
        for (std::size_t i = lo; i < hi; ++i) {
            ++h[(key[in[i]] >> shift) & (kRadixBuckets - 1)];
        }
    }

    // Bucket-major, thread-minor exclusive scan.
    u32 running = 0;
    for (u32 b = 0; b < kRadixBuckets; ++b) {
        for (int t = 0; t < threads; ++t) {
            u32& cell = hist[static_cast<std::size_t>(t) * kRadixBuckets + b];
            const u32 c = cell;
            cell = running;
            running += c;
        }
    }

#pragma omp parallel num_threads(threads)
    {
        const int t = omp_get_thread_num();
        const std::size_t lo = std::min(n, static_cast<std::size_t>(t) * block);
        const std::size_t hi = std::min(n, lo + block);
        u32* h = hist.data() + static_cast<std::size_t>(t) * kRadixBuckets;
        for (std::size_t i = lo; i < hi; ++i) {
            out[h[(key[in[i]] >> shift) & (kRadixBuckets - 1)]++] = in[i];
        }
    }
}

// Stable sort of `in` by full 32-bit key[item]; one digit pass suffices while
// key values stay below 2^16.
void radix_sort_parallel(std::vector<u32>& in, std::vector<u32>& out, std::vector<u32>& scratch,
                         const std::vector<u32>& key, u32 max_key, int threads,
                         std::vector<u32>& hist) {
    if (max_key < kRadixBuckets) {
        radix_pass_parallel(in, out, key, 0, threads, hist);
    } else {
        radix_pass_parallel(in, scratch, key, 0, threads, hist);
        radix_pass_parallel(scratch, out, key, kRadixBits, threads, hist);
    }
}

std::vector<u32> build_sa_parallel(std::span<const u8> text) {
    const std::size_t n = text.size();
    const int threads = omp_get_max_threads();

    std::vector<u32> sa(n);
    std::vector<u32> rank(n);
    std::vector<u32> key2(n);
    std::vector<u32> tmp(n);
    std::vector<u32> scratch(n);
    std::vector<u32> ident(n);
    std::vector<u32> hist;

#pragma omp parallel for num_threads(threads) schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        ident[i] = static_cast<u32>(i);
        key2[i] = text[i];
    }
    radix_pass_parallel(ident, sa, key2, 0, threads, hist);

    u32 distinct = 0;
    for (u32 i = 0; i < n; ++i) {
        if (i == 0 || text[sa[i]] != text[sa[i - 1]]) {
            ++distinct;
        }
        rank[sa[i]] = distinct;
    }

    std::vector<u32> new_rank(n);
    for (std::size_t h = 1; distinct < n; h *= 2) {
#pragma omp parallel for num_threads(threads) schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            key2[i] = (i + h < n) ? rank[i + h] : 0;
        }
        radix_sort_parallel(ident, tmp, scratch, key2, distinct, threads, hist);
        radix_sort_parallel(tmp, sa, scratch, rank, distinct, threads, hist);

        u32 next = 0;
        for (u32 i = 0; i < n; ++i) {
            if (i == 0 || rank[sa[i]] != rank[sa[i - 1]] || key2[sa[i]] != key2[sa[i - 1]]) {
                ++next;
            }
            new_rank[sa[i]] = next;
        }
        rank.swap(new_rank);
        distinct = next;
    }
    return sa;
}

std::vector<u32> build_lcp_parallel(std::span<const u8> text, const std::vector<u32>& sa) {
    const std::size_t n = text.size();
    const int threads = omp_get_max_threads();
    std::vector<u32> lcp(n, 0);
    std::vector<u32> rank_of(n);

#pragma omp parallel for num_threads(threads) schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        rank_of[sa[i]] = static_cast<u32>(i);
    }

    const std::size_t block = (n + threads - 1) / threads;
#pragma omp parallel num_threads(threads)
    {
        const int t = omp_get_thread_num();
        const std::size_t lo = std::min(n, static_cast<std::size_t>(t) * block);
        const std::size_t hi = std::min(n, lo + block);
        kasai_range(text, sa, rank_of, lcp, lo, hi);
    }
    return lcp;
}

#endif  // _OPENMP

bool use_parallel(std::size_t n, Kernel kernel) {
#ifdef _OPENMP
    switch (kernel) {
        case Kernel::Serial: return false;
        case Kernel::Parallel: return true;
        case Kernel::Auto: return n >= kParallelCutoff && omp_get_max_threads() > 1;
    }
    return false;
#else
    (void)n;
    (void)kernel;
    return false;
#endif
}

}  // namespace

SuffixArray build_suffix_array(std::span<const u8> text, Kernel kernel) {
    SuffixArray result;
    if (text.empty()) {
        return result;
    }
#ifdef _OPENMP
    if (use_parallel(text.size(), kernel)) {
        result.sa = build_sa_parallel(text);
        result.lcp = build_lcp_parallel(text, result.sa);
        return result;
    }
#endif
    result.sa = build_sa_serial(text);
    result.lcp = build_lcp_serial(text, result.sa);
    return result;
}

SuffixArray build_suffix_array(std::string_view text, Kernel kernel) {
    return build_suffix_array(
        std::span<const u8>(reinterpret_cast<const u8*>(text.data()), text.size()), kernel);
}

}  // namespace corpusforge
