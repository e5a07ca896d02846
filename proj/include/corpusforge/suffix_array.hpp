#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace corpusforge {

// Suffix array with LCP array. sa is the permutation of suffix start
// positions in lexicographic suffix order; lcp[i] is the length of the
// longest common prefix of the suffixes starting at sa[i-1] and sa[i],
// with lcp[0] == 0. Both are empty for empty text.
struct SuffixArray {
    std::vector<std::uint32_t> sa;
    std::vector<std::uint32_t> lcp;
};

// Kernel selection for the construction and scan loops. Serial is the
// reference implementation; Parallel uses OpenMP and produces bit-identical
// results (the suffix array of a text is unique). Auto picks Parallel for
// large inputs when OpenMP is available.
enum class Kernel {
    Serial,
    Parallel,
    Auto,
};

// Prefix-doubling construction with stable counting/radix sorts followed by
// Kasai's LCP pass: O(n log n) worst case, a handful of rounds on realistic
// text. Deterministic for a given input regardless of kernel or thread count.
SuffixArray build_suffix_array(std::span<const std::uint8_t> text, Kernel kernel = Kernel::Auto);
SuffixArray build_suffix_array(std::string_view text, Kernel kernel = Kernel::Auto);

}  // namespace corpusforge
