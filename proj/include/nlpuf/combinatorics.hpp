#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "nlpuf/common.hpp"

namespace nlpuf {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    BigInt r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Binomial coefficient for subset ranking; throws if it does not fit in 64 bits.
inline std::uint64_t binomial64(int n, int k) {
    const BigInt b = binomial(n, k);
    if (b > std::numeric_limits<std::uint64_t>::max()) throw DomainError("binomial coefficient exceeds 64 bits");
    return static_cast<std::uint64_t>(b);
}

/// Lexicographic rank of a sorted k-subset of {0..n-1} (combinatorial number system).
inline std::uint64_t rank_subset(std::span<const int> subset, int n) {
    const int k = static_cast<int>(subset.size());
    std::uint64_t rank = 0;
    int prev = -1;
    for (int i = 0; i < k; ++i) {
        const int a = subset[i];
        if (a <= prev || a >= n) throw DomainError("rank_subset: subset must be strictly increasing within range");
        for (int j = prev + 1; j < a; ++j) rank += binomial64(n - 1 - j, k - 1 - i);
        prev = a;
    }
    return rank;
}

inline std::vector<int> unrank_subset(std::uint64_t rank, int n, int k) {
    if (k < 0 || k > n) throw DomainError("unrank_subset: invalid size");
    if (rank >= binomial64(n, k)) throw DomainError("unrank_subset: rank out of range");
    std::vector<int> out;
    out.reserve(k);
    int next = 0;
    for (int i = 0; i < k; ++i) {
        for (;; ++next) {
            const std::uint64_t block = binomial64(n - 1 - next, k - 1 - i);
            if (rank < block) break;
            rank -= block;
        }
        out.push_back(next++);
    }
    return out;
}

}  // namespace nlpuf
