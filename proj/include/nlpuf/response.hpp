#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "nlpuf/challenge.hpp"
#include "nlpuf/crossbar.hpp"
#include "nlpuf/environment.hpp"

namespace nlpuf {

// =============================================================================
// Response keys
// =============================================================================

inline constexpr int kPacketBits = 64;

/// Bit string packed into 64-bit packets; bit i of the key is bit (63 - i % 64) of packet
/// i / 64, so the first challenge is the most significant bit.
class ResponseKey {
public:
    ResponseKey() = default;
    explicit ResponseKey(int symbol_width) : symbol_width_(symbol_width) {
        if (symbol_width != 1 && symbol_width != 2) throw DomainError("response key: symbol width must be 1 or 2");
    }

    void push_bit(bool b) {
        if (bits_ % kPacketBits == 0) packets_.push_back(0);
        if (b) packets_.back() |= std::uint64_t{1} << (kPacketBits - 1 - bits_ % kPacketBits);
        ++bits_;
    }

    /// Appends a symbol most significant bit first.
    void push_symbol(unsigned s) {
        if (s >= (1u << symbol_width_)) throw DomainError("response key: symbol out of range");
        for (int b = symbol_width_ - 1; b >= 0; --b) push_bit((s >> b) & 1u);
    }

    [[nodiscard]] bool bit(std::size_t i) const {
        return (packets_[i / kPacketBits] >> (kPacketBits - 1 - i % kPacketBits)) & 1u;
    }

    [[nodiscard]] unsigned symbol(std::size_t i) const {
        unsigned s = 0;
        for (int b = 0; b < symbol_width_; ++b) s = (s << 1) | bit(i * symbol_width_ + b);
        return s;
    }

    [[nodiscard]] std::size_t size() const { return bits_; }
    [[nodiscard]] std::size_t symbol_count() const { return bits_ / symbol_width_; }
    [[nodiscard]] int symbol_width() const { return symbol_width_; }
    [[nodiscard]] bool complete_packets() const { return bits_ % kPacketBits == 0; }

    /// Whole 64-bit packets; a partial tail is rejected.
    [[nodiscard]] const std::vector<std::uint64_t>& packets() const {
        if (!complete_packets()) throw DomainError("response key: length is not a multiple of 64");
        return packets_;
    }

    static ResponseKey from_packets(std::vector<std::uint64_t> packets, int symbol_width = 1) {
        ResponseKey k(symbol_width);
        k.bits_ = packets.size() * kPacketBits;
        k.packets_ = std::move(packets);
        return k;
    }

private:
    int symbol_width_ = 1;
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> packets_;
};

/// One 16-digit lowercase hex packet per line.
inline void write_hex(std::ostream& os, const std::vector<std::uint64_t>& packets) {
    char buf[24];
    for (auto p : packets) {
        std::snprintf(buf, sizeof buf, "%016llx\n", static_cast<unsigned long long>(p));
        os << buf;
    }
}

inline std::vector<std::uint64_t> read_hex(std::istream& is) {
    std::vector<std::uint64_t> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.size() != 16) throw ParseError("hex: expected 16 hex digits", lineno);
        std::uint64_t v = 0;
        for (char c : line) {
            int d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
            else throw ParseError("hex: invalid digit", lineno);
            v = (v << 4) | static_cast<std::uint64_t>(d);
        }
        out.push_back(v);
    }
    return out;
}

// =============================================================================
// Single-layer response
// =============================================================================

struct ReadOptions {
    bool transpose = false;   // logical columns map to physical rows
    int layer = 0;            // addressed layer of a stacked array
    SolverOptions solver;
};

struct ChallengeBias {
    BiasConfig bias;
    std::vector<int> group_a;   // flat line ids
    std::vector<int> group_b;
};

/// Line roles for a challenge: driven columns at v_b, sensed rows virtually grounded,
/// unselected lines per the challenge map; lines of other layers float.
inline ChallengeBias make_challenge_bias(const CrossbarArray& array, const Challenge& ch, Scalar v_b,
                                         const ReadOptions& opt = {}) {
    const int M = opt.transpose ? array.rows() : array.cols();
    const int N = opt.transpose ? array.cols() : array.rows();
    ch.validate(ChallengeDims{M, N, static_cast<int>(ch.cols.size()), static_cast<int>(ch.rows.size())});
    auto col_line = [&](int i) { return opt.transpose ? array.row_line(opt.layer, i) : array.col_line(opt.layer, i); };
    auto row_line = [&](int i) { return opt.transpose ? array.col_line(opt.layer, i) : array.row_line(opt.layer, i); };

    ChallengeBias cb{BiasConfig(array), {}, {}};
    for (int c : ch.cols) cb.bias.set(col_line(c), LineBias::driven(v_b));
    for (int r : ch.rows) cb.bias.set(row_line(r), LineBias::virtual_ground());
    std::size_t u = 0;
    for (int c : ch.unselected_cols(M))
        cb.bias.set(col_line(c), ch.line_grounded(u++) ? LineBias::grounded() : LineBias::floating());
    for (int r : ch.unselected_rows(N))
        cb.bias.set(row_line(r), ch.line_grounded(u++) ? LineBias::grounded() : LineBias::floating());
    for (int r : ch.group_a) cb.group_a.push_back(row_line(r));
    for (int r : ch.group_b()) cb.group_b.push_back(row_line(r));
    return cb;
}

/// I(group A) - I(group B), optionally with supply variation and per-group read noise.
inline Scalar respond_delta(const CrossbarArray& array, const Challenge& ch, Scalar v_b,
                            const ReadEnvironment* env = nullptr, const ReadOptions& opt = {}) {
    const Scalar v = env ? env->supply(v_b) : v_b;
    const ChallengeBias cb = make_challenge_bias(array, ch, v, opt);
    const SolveResult res = solve_network(array, cb.bias, opt.solver);
    Scalar ia = group_current(res, cb.group_a);
    Scalar ib = group_current(res, cb.group_b);
    if (env) {
        ia = env->current(ia);
        ib = env->current(ib);
    }
    return ia - ib;
}

/// 1 when group A sinks more current than group B; ties give 0.
inline bool respond_bit(const CrossbarArray& array, const Challenge& ch, Scalar v_b,
                        const ReadEnvironment* env = nullptr, const ReadOptions& opt = {}) {
    return respond_delta(array, ch, v_b, env, opt) > 0.0;
}

inline ResponseKey respond_key(const CrossbarArray& array, const std::vector<Challenge>& challenges, Scalar v_b,
                               const ReadEnvironment* env = nullptr, const ReadOptions& opt = {}) {
    if (challenges.empty()) throw DomainError("respond_key: need at least one challenge");
    ResponseKey key;
    for (const auto& ch : challenges) key.push_bit(respond_bit(array, ch, v_b, env, opt));
    return key;
}

/// Uniform grid over [v_lo, v_hi] with both endpoints included.
inline Scalar bias_from_code(std::uint32_t code, int k = 3, Scalar v_lo = 0.2, Scalar v_hi = 0.6) {
    if (k < 1 || k > 31) throw DomainError("bias_from_code: k must be in [1, 31]");
    const std::uint32_t levels = 1u << k;
    if (code >= levels) throw DomainError("bias_from_code: code exceeds k bits");
    if (code == levels - 1) return v_hi;
    return v_lo + code * (v_hi - v_lo) / (levels - 1);
}

inline constexpr Scalar kLinearBias = 0.2;
inline constexpr Scalar kNonlinearBias = 0.6;

inline unsigned quaternary_symbol(bool bit_linear, bool bit_nonlinear) {
    return 2u * static_cast<unsigned>(bit_nonlinear) + static_cast<unsigned>(bit_linear);
}

/// 2 * bit(600 mV) + bit(200 mV).
inline unsigned quaternary_respond(const CrossbarArray& array, const Challenge& ch,
                                   const ReadEnvironment* env = nullptr, const ReadOptions& opt = {}) {
    const bool lo = respond_bit(array, ch, kLinearBias, env, opt);
    const bool hi = respond_bit(array, ch, kNonlinearBias, env, opt);
    return quaternary_symbol(lo, hi);
}

}  // namespace nlpuf
