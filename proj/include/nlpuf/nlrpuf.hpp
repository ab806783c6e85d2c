#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nlpuf/challenge.hpp"
#include "nlpuf/crossbar.hpp"
#include "nlpuf/response.hpp"

namespace nlpuf {

// =============================================================================
// Two-layer nonlinear reconfigurable PUF
// =============================================================================
//
// Input-layer segment arrays answer one challenge each; their bits form the hidden challenge
// (segment 0 is the most significant bit). The hidden challenge selects a challenge on the
// output segment, which is read at the bias encoded by the k-bit code. Dummy segments answer
// the challenge of input segment (d mod l) and their bits are dropped.

using HcToSelection = std::function<Challenge(std::uint64_t hc)>;

struct NlrpufConfig {
    int l = 10;
    std::vector<ChallengeDims> segments;   // l entries; empty means l copies of `segment`
    ChallengeDims segment{10, 10, 5, 2};
    int dummy_segments = 2;
    ChallengeDims output{10, 10, 5, 2};
    int k = 3;
    bool bias_encoding = true;
    Scalar v_lo = 0.2;
    Scalar v_hi = 0.6;
    HcToSelection hc_to_selection;          // empty: unrank hc mod the output challenge space
    ReadOptions read;

    [[nodiscard]] const ChallengeDims& segment_dims(int i) const {
        return segments.empty() ? segment : segments[static_cast<std::size_t>(i)];
    }

    void validate() const {
        if (l < 1 || l > 63) throw DomainError("nlrpuf: l must be in [1, 63]");
        if (!segments.empty() && static_cast<int>(segments.size()) != l)
            throw DomainError("nlrpuf: need one segment descriptor per hidden-challenge bit");
        for (int i = 0; i < l; ++i) segment_dims(i).validate();
        output.validate();
        if (dummy_segments < 0) throw DomainError("nlrpuf: dummy segment count must be >= 0");
        if (k < 1 || k > 31) throw DomainError("nlrpuf: k must be in [1, 31]");
    }
};

/// Array snapshots for one NL-RPUF instance.
struct NlrpufArrays {
    std::vector<CrossbarArray> segments;   // l input segments
    std::vector<CrossbarArray> dummies;
    std::vector<CrossbarArray> output;     // exactly one
};

struct NlrpufInput {
    std::vector<Challenge> segment_challenges;   // one per input segment
    std::uint32_t bias_code = 0;
};

inline void check_arrays(const NlrpufConfig& cfg, const NlrpufArrays& arr) {
    cfg.validate();
    if (static_cast<int>(arr.segments.size()) != cfg.l) throw DomainError("nlrpuf: wrong number of segment arrays");
    if (static_cast<int>(arr.dummies.size()) != cfg.dummy_segments)
        throw DomainError("nlrpuf: wrong number of dummy arrays");
    if (arr.output.size() != 1) throw DomainError("nlrpuf: need exactly one output array");
}

/// Bit j of the result (counted from the most significant of l bits) answers segment j.
inline std::uint64_t hidden_challenge(const NlrpufConfig& cfg, const NlrpufArrays& arr,
                                      const std::vector<Challenge>& segment_challenges, Scalar v_b,
                                      const ReadEnvironment* env = nullptr) {
    check_arrays(cfg, arr);
    if (static_cast<int>(segment_challenges.size()) != cfg.l)
        throw DomainError("hidden_challenge: need one challenge per input segment");
    std::uint64_t hc = 0;
    for (int j = 0; j < cfg.l; ++j) {
        const bool bit = respond_bit(arr.segments[j], segment_challenges[j], v_b, env, cfg.read);
        hc = (hc << 1) | static_cast<std::uint64_t>(bit);
    }
    for (int d = 0; d < cfg.dummy_segments; ++d)
        (void)respond_bit(arr.dummies[d], segment_challenges[d % cfg.l], v_b, env, cfg.read);
    return hc;
}

inline Challenge select_output_challenge(const NlrpufConfig& cfg, std::uint64_t hc) {
    if (cfg.hc_to_selection) {
        Challenge ch = cfg.hc_to_selection(hc);
        ch.validate(cfg.output);
        return ch;
    }
    const BigInt space = challenge_space(cfg.output, UnselectedPolicy::AllFloating);
    return challenge_from_rank(BigInt(hc) % space, cfg.output, UnselectedPolicy::AllFloating);
}

/// Response at an explicit bias, bypassing the code.
inline bool nlrpuf_respond_at(const NlrpufConfig& cfg, const NlrpufArrays& arr,
                              const std::vector<Challenge>& segment_challenges, Scalar v_b,
                              const ReadEnvironment* env = nullptr) {
    const std::uint64_t hc = hidden_challenge(cfg, arr, segment_challenges, v_b, env);
    return respond_bit(arr.output.front(), select_output_challenge(cfg, hc), v_b, env, cfg.read);
}

inline bool nlrpuf_respond(const NlrpufConfig& cfg, const NlrpufArrays& arr, const NlrpufInput& in,
                           const ReadEnvironment* env = nullptr) {
    const Scalar v_b = cfg.bias_encoding ? bias_from_code(in.bias_code, cfg.k, cfg.v_lo, cfg.v_hi) : cfg.v_lo;
    return nlrpuf_respond_at(cfg, arr, in.segment_challenges, v_b, env);
}

/// 2 * bit(600 mV) + bit(200 mV) of the full two-layer response.
inline unsigned nlrpuf_quaternary(const NlrpufConfig& cfg, const NlrpufArrays& arr,
                                  const std::vector<Challenge>& segment_challenges,
                                  const ReadEnvironment* env = nullptr) {
    const bool lo = nlrpuf_respond_at(cfg, arr, segment_challenges, kLinearBias, env);
    const bool hi = nlrpuf_respond_at(cfg, arr, segment_challenges, kNonlinearBias, env);
    return quaternary_symbol(lo, hi);
}

/// Product of the segment challenge spaces (all lines floating), times 2^k with bias encoding.
inline BigInt nlrpuf_input_space(const NlrpufConfig& cfg) {
    cfg.validate();
    BigInt s = 1;
    for (int i = 0; i < cfg.l; ++i) s *= challenge_space(cfg.segment_dims(i), UnselectedPolicy::AllFloating);
    if (cfg.bias_encoding) s <<= cfg.k;
    return s;
}

/// Mixed radix, most significant first: segment 0 .. segment l-1, then the bias code.
inline NlrpufInput nlrpuf_input_from_rank(const NlrpufConfig& cfg, const BigInt& rank) {
    if (rank < 0 || rank >= nlrpuf_input_space(cfg)) throw DomainError("nlrpuf_input_from_rank: rank out of range");
    BigInt r = rank;
    NlrpufInput in;
    if (cfg.bias_encoding) {
        const BigInt codes = BigInt(1) << cfg.k;
        in.bias_code = static_cast<std::uint32_t>(r % codes);
        r /= codes;
    }
    in.segment_challenges.resize(static_cast<std::size_t>(cfg.l));
    for (int i = cfg.l - 1; i >= 0; --i) {
        const BigInt space = challenge_space(cfg.segment_dims(i), UnselectedPolicy::AllFloating);
        in.segment_challenges[i] = challenge_from_rank(r % space, cfg.segment_dims(i), UnselectedPolicy::AllFloating);
        r /= space;
    }
    return in;
}

/// Inputs that broadcast one challenge to every input segment: (challenge, bias code).
inline BigInt nlrpuf_shared_input_space(const NlrpufConfig& cfg) {
    cfg.validate();
    for (int i = 1; i < cfg.l; ++i)
        if (!(cfg.segment_dims(i) == cfg.segment_dims(0)))
            throw DomainError("nlrpuf: a shared challenge needs identical segment shapes");
    BigInt s = challenge_space(cfg.segment_dims(0), UnselectedPolicy::AllFloating);
    if (cfg.bias_encoding) s <<= cfg.k;
    return s;
}

inline NlrpufInput nlrpuf_shared_input_from_rank(const NlrpufConfig& cfg, const BigInt& rank) {
    if (rank < 0 || rank >= nlrpuf_shared_input_space(cfg))
        throw DomainError("nlrpuf_shared_input_from_rank: rank out of range");
    BigInt r = rank;
    NlrpufInput in;
    if (cfg.bias_encoding) {
        in.bias_code = static_cast<std::uint32_t>(r % (BigInt(1) << cfg.k));
        r >>= cfg.k;
    }
    const Challenge ch = challenge_from_rank(r, cfg.segment_dims(0), UnselectedPolicy::AllFloating);
    in.segment_challenges.assign(static_cast<std::size_t>(cfg.l), ch);
    return in;
}

inline BigInt nlrpuf_rank_from_input(const NlrpufConfig& cfg, const NlrpufInput& in) {
    cfg.validate();
    if (static_cast<int>(in.segment_challenges.size()) != cfg.l) throw DomainError("nlrpuf: wrong challenge count");
    BigInt r = 0;
    for (int i = 0; i < cfg.l; ++i) {
        Challenge ch = in.segment_challenges[i];
        ch.bias_code.reset();
        r = r * challenge_space(cfg.segment_dims(i), UnselectedPolicy::AllFloating) +
            rank_from_challenge(ch, cfg.segment_dims(i), UnselectedPolicy::AllFloating);
    }
    if (cfg.bias_encoding) {
        if (in.bias_code >= (1u << cfg.k)) throw DomainError("nlrpuf: bias code exceeds k bits");
        r = (r << cfg.k) + in.bias_code;
    }
    return r;
}

}  // namespace nlpuf
