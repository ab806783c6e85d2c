#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nlpuf/combinatorics.hpp"
#include "nlpuf/common.hpp"

namespace nlpuf {

// =============================================================================
// Challenge space
// =============================================================================
//
// A challenge drives m of the M "column" lines at V_B, virtually grounds n of the N "row"
// lines, splits the n sensed rows into group A and its complement, and sets every unselected
// line Floating or Grounded. Columns/rows here are logical roles; ReadOptions::transpose maps
// them onto physical rows/columns.
//
// The two halves of a partition are interchangeable up to a bit flip, so each unordered
// partition has one canonical group A: the half holding the smallest selected row when the
// driven column indices sum to an even number, its complement otherwise. For n = 2 that leaves
// exactly one partition and the challenge space equals crp_count().

struct ChallengeDims {
    int M = 10;  // column lines
    int N = 10;  // row lines
    int m = 5;   // driven columns
    int n = 2;   // sensed rows

    void validate() const {
        if (M < 1 || N < 1 || M > 62 || N > 62) throw DomainError("challenge dims: M, N must be in [1, 62]");
        if (m < 0 || m > M) throw DomainError("challenge dims: require 0 <= m <= M");
        if (n <= 0 || n > N || n % 2 != 0) throw DomainError("challenge dims: n must be even and in (0, N]");
    }

    friend bool operator==(const ChallengeDims&, const ChallengeDims&) = default;
};

enum class UnselectedPolicy { AllFloating, Configurable };

struct Challenge {
    std::vector<int> cols;         // driven, ascending
    std::vector<int> rows;         // virtually grounded, ascending
    std::vector<int> group_a;      // n/2 of rows, ascending
    std::vector<char> grounded;    // per unselected line (unselected cols, then unselected rows); 1 = Grounded
    std::optional<std::uint32_t> bias_code;

    [[nodiscard]] std::vector<int> group_b() const {
        std::vector<int> b;
        std::set_difference(rows.begin(), rows.end(), group_a.begin(), group_a.end(), std::back_inserter(b));
        return b;
    }

    [[nodiscard]] std::vector<int> unselected_cols(int M) const { return complement(cols, M); }
    [[nodiscard]] std::vector<int> unselected_rows(int N) const { return complement(rows, N); }

    /// Structural validity; canonical partition is not required here.
    void validate(const ChallengeDims& d) const {
        auto check = [](const std::vector<int>& v, int lim, std::size_t size, const char* what) {
            if (v.size() != size) throw DomainError(std::string("challenge: wrong number of ") + what);
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (v[i] < 0 || v[i] >= lim) throw DomainError(std::string("challenge: ") + what + " out of range");
                if (i > 0 && v[i] <= v[i - 1]) throw DomainError(std::string("challenge: ") + what + " not ascending");
            }
        };
        d.validate();
        check(cols, d.M, d.m, "cols");
        check(rows, d.N, d.n, "rows");
        check(group_a, d.N, d.n / 2, "group A rows");
        if (!std::includes(rows.begin(), rows.end(), group_a.begin(), group_a.end()))
            throw DomainError("challenge: group A must be a subset of the selected rows");
        if (!grounded.empty() && grounded.size() != static_cast<std::size_t>((d.M - d.m) + (d.N - d.n)))
            throw DomainError("challenge: unselected map has wrong length");
    }

    [[nodiscard]] bool line_grounded(std::size_t unselected_index) const {
        return unselected_index < grounded.size() && grounded[unselected_index];
    }

    friend bool operator==(const Challenge&, const Challenge&) = default;

private:
    static std::vector<int> complement(const std::vector<int>& sel, int n) {
        std::vector<int> out;
        for (int i = 0; i < n; ++i)
            if (!std::binary_search(sel.begin(), sel.end(), i)) out.push_back(i);
        return out;
    }
};

/// C(M,m) * C(N,n) * 2^free_lines; free_lines = (M-m)+(N-n) for fully configurable unselected
/// lines, 0 when they all float.
inline BigInt crp_count(int M, int N, int m, int n, int free_lines) {
    ChallengeDims{M, N, m, n}.validate();
    if (free_lines < 0 || free_lines > (M - m) + (N - n)) throw DomainError("crp_count: invalid free line count");
    return binomial(M, m) * binomial(N, n) * (BigInt(1) << free_lines);
}

inline int free_lines(const ChallengeDims& d, UnselectedPolicy policy) {
    return policy == UnselectedPolicy::Configurable ? (d.M - d.m) + (d.N - d.n) : 0;
}

inline BigInt crp_count(const ChallengeDims& d, UnselectedPolicy policy) {
    return crp_count(d.M, d.N, d.m, d.n, free_lines(d, policy));
}

namespace detail {
inline bool odd_column_sum(const std::vector<int>& cols) {
    int s = 0;
    for (int c : cols) s += c;
    return (s & 1) != 0;
}
}  // namespace detail

/// Distinct group-A choices up to swapping the halves.
inline std::uint64_t partition_count(int n) { return binomial64(n - 1, n / 2 - 1); }

/// Number of canonical challenges, i.e. the rank range.
inline BigInt challenge_space(const ChallengeDims& d, UnselectedPolicy policy) {
    return crp_count(d, policy) * partition_count(d.n);
}

/// Mixed radix, most significant first: column subset, row subset, partition, unselected map.
inline Challenge challenge_from_rank(const BigInt& rank, const ChallengeDims& d, UnselectedPolicy policy) {
    d.validate();
    if (rank < 0 || rank >= challenge_space(d, policy)) throw DomainError("challenge_from_rank: rank out of range");
    const int free = free_lines(d, policy);
    BigInt r = rank;
    const BigInt map_radix = BigInt(1) << free;
    const BigInt map_bits = r % map_radix;
    r /= map_radix;
    const std::uint64_t parts = partition_count(d.n);
    const auto part = static_cast<std::uint64_t>(r % parts);
    r /= parts;
    const std::uint64_t row_radix = binomial64(d.N, d.n);
    const auto row_rank = static_cast<std::uint64_t>(r % row_radix);
    const auto col_rank = static_cast<std::uint64_t>(r / row_radix);

    Challenge ch;
    ch.cols = unrank_subset(col_rank, d.M, d.m);
    ch.rows = unrank_subset(row_rank, d.N, d.n);
    // group A = smallest row plus (n/2 - 1) of the remaining n - 1 rows
    const auto rest = unrank_subset(part, d.n - 1, d.n / 2 - 1);
    ch.group_a.push_back(ch.rows[0]);
    for (int i : rest) ch.group_a.push_back(ch.rows[i + 1]);
    if (detail::odd_column_sum(ch.cols)) ch.group_a = ch.group_b();
    ch.grounded.assign((d.M - d.m) + (d.N - d.n), 0);
    for (int i = 0; i < free; ++i) ch.grounded[i] = bit_test(map_bits, free - 1 - i) ? 1 : 0;
    return ch;
}

inline BigInt rank_from_challenge(const Challenge& ch, const ChallengeDims& d, UnselectedPolicy policy) {
    ch.validate(d);
    const std::vector<int> base = detail::odd_column_sum(ch.cols) ? ch.group_b() : ch.group_a;
    if (base.empty() || base[0] != ch.rows[0])
        throw DomainError("rank_from_challenge: group A is not in canonical orientation");
    const int free = free_lines(d, policy);
    if (policy == UnselectedPolicy::AllFloating &&
        std::any_of(ch.grounded.begin(), ch.grounded.end(), [](char g) { return g != 0; }))
        throw DomainError("rank_from_challenge: grounded line under all-floating policy");

    std::vector<int> rest;
    for (std::size_t i = 1; i < base.size(); ++i) {
        const auto it = std::lower_bound(ch.rows.begin(), ch.rows.end(), base[i]);
        rest.push_back(static_cast<int>(it - ch.rows.begin()) - 1);
    }
    BigInt r = rank_subset(ch.cols, d.M);
    r = r * binomial64(d.N, d.n) + rank_subset(ch.rows, d.N);
    r = r * partition_count(d.n) + rank_subset(rest, d.n - 1);
    BigInt map_bits = 0;
    for (int i = 0; i < free; ++i)
        if (ch.line_grounded(i)) bit_set(map_bits, free - 1 - i);
    return (r << free) + map_bits;
}

// -----------------------------------------------------------------------------
// Text form: cols=<c1,c2,...>;rows=<r1,...>;A=<...>;un=<F|G string>;bias=<code>
// -----------------------------------------------------------------------------

inline std::string to_string(const Challenge& ch, const ChallengeDims& d) {
    auto join = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    std::string un(static_cast<std::size_t>((d.M - d.m) + (d.N - d.n)), 'F');
    for (std::size_t i = 0; i < un.size(); ++i)
        if (ch.line_grounded(i)) un[i] = 'G';
    std::string out = "cols=" + join(ch.cols) + ";rows=" + join(ch.rows) + ";A=" + join(ch.group_a) + ";un=" + un + ";bias=";
    if (ch.bias_code) out += std::to_string(*ch.bias_code);
    return out;
}

inline Challenge parse_challenge(const std::string& text, const ChallengeDims& d) {
    auto ints = [](const std::string& s) {
        std::vector<int> v;
        if (s.empty()) return v;
        std::istringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            std::size_t pos = 0;
            int x = 0;
            try {
                x = std::stoi(tok, &pos);
            } catch (const std::exception&) {
                throw ParseError("challenge: bad integer '" + tok + "'");
            }
            if (pos != tok.size()) throw ParseError("challenge: bad integer '" + tok + "'");
            v.push_back(x);
        }
        return v;
    };
    const char* keys[] = {"cols", "rows", "A", "un", "bias"};
    std::vector<std::string> fields;
    std::istringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ';')) fields.push_back(part);
    if (fields.size() != 5) throw ParseError("challenge: expected 5 ';'-separated fields");
    std::string val[5];
    for (int i = 0; i < 5; ++i) {
        const std::string prefix = std::string(keys[i]) + "=";
        if (fields[i].rfind(prefix, 0) != 0) throw ParseError("challenge: expected field '" + prefix + "'");
        val[i] = fields[i].substr(prefix.size());
    }
    Challenge ch;
    ch.cols = ints(val[0]);
    ch.rows = ints(val[1]);
    ch.group_a = ints(val[2]);
    for (char c : val[3]) {
        if (c != 'F' && c != 'G') throw ParseError("challenge: unselected map must use F/G");
        ch.grounded.push_back(c == 'G' ? 1 : 0);
    }
    if (!val[4].empty()) {
        const auto b = ints(val[4]);
        if (b.size() != 1 || b[0] < 0) throw ParseError("challenge: bad bias code");
        ch.bias_code = static_cast<std::uint32_t>(b[0]);
    }
    try {
        ch.validate(d);
    } catch (const DomainError& e) {
        throw ParseError(e.what());
    }
    return ch;
}

/// Distinct uniformly random ranks when count <= space; otherwise successive independent
/// permutations of the space, so no rank repeats more than ceil(count / space) times.
inline std::vector<BigInt> sample_ranks(const BigInt& space, std::size_t count, Rng& rng) {
    std::vector<BigInt> out;
    out.reserve(count);
    if (space <= 0) throw DomainError("sample_ranks: empty space");
    if (space <= BigInt(1u << 24)) {
        const auto S = static_cast<std::uint64_t>(space);
        std::vector<std::uint64_t> perm(S);
        while (out.size() < count) {
            std::iota(perm.begin(), perm.end(), 0);
            const std::size_t take = std::min<std::size_t>(count - out.size(), S);
            for (std::size_t i = 0; i < take; ++i) {
                std::uniform_int_distribution<std::uint64_t> pick(i, S - 1);
                std::swap(perm[i], perm[pick(rng)]);
                out.emplace_back(perm[i]);
            }
        }
        return out;
    }
    // large space: rejection of duplicates
    std::set<BigInt> seen;
    const unsigned bits = msb(space) + 1;
    while (out.size() < count) {
        BigInt r = 0;
        for (unsigned b = 0; b < bits; b += 64) r |= BigInt(rng()) << b;
        r &= (BigInt(1) << bits) - 1;
        if (r >= space) continue;
        if (!seen.insert(r).second) continue;
        out.push_back(r);
    }
    return out;
}

}  // namespace nlpuf
