#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlpuf/common.hpp"

namespace nlpuf {

// =============================================================================
// Hamming-distance metrics over 64-bit response packets
// =============================================================================
//
// Every sample is a bit count out of kMetricBits; percentages are 100 * count / kMetricBits.
// Reports keep exact integer sums so independent implementations can be compared bit-for-bit.

inline constexpr int kMetricBits = 64;
inline constexpr int kHistogramBins = 101;   // 1% bins, the last one holds exactly 100%

using Packets = std::span<const std::uint64_t>;

struct MetricsReport {
    std::string metric;
    std::size_t n = 0;                 // samples (keys, pairs or key positions)
    std::uint64_t count_sum = 0;       // sum of per-sample bit counts
    std::uint64_t count_sq_sum = 0;    // sum of squared bit counts
    std::uint32_t count_min = 0;
    std::uint32_t count_max = 0;
    std::vector<std::uint64_t> histogram;   // kHistogramBins entries

    [[nodiscard]] Scalar mean_pct() const {
        return n == 0 ? 0.0 : 100.0 * static_cast<Scalar>(count_sum) / (static_cast<Scalar>(n) * kMetricBits);
    }
    /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
    [[nodiscard]] Scalar std_pct() const {
        if (n < 2) return 0.0;
        const long double s = static_cast<long double>(count_sum);
        const long double ss = static_cast<long double>(count_sq_sum);
        const long double var = (ss - s * s / static_cast<long double>(n)) / static_cast<long double>(n - 1);
        return 100.0 * std::sqrt(static_cast<Scalar>(std::max(var, 0.0L))) / kMetricBits;
    }
    [[nodiscard]] Scalar min_pct() const { return 100.0 * count_min / kMetricBits; }
    [[nodiscard]] Scalar max_pct() const { return 100.0 * count_max / kMetricBits; }
};

namespace detail {

class Accumulator {
public:
    explicit Accumulator(std::string metric) {
        r_.metric = std::move(metric);
        r_.histogram.assign(kHistogramBins, 0);
    }

    void add(std::uint32_t count) {
        if (r_.n == 0) r_.count_min = r_.count_max = count;
        r_.count_min = std::min(r_.count_min, count);
        r_.count_max = std::max(r_.count_max, count);
        ++r_.n;
        r_.count_sum += count;
        r_.count_sq_sum += static_cast<std::uint64_t>(count) * count;
        ++r_.histogram[(100u * count) / kMetricBits];
    }

    void merge(const MetricsReport& o) {
        if (o.n == 0) return;
        if (r_.n == 0) {
            r_.count_min = o.count_min;
            r_.count_max = o.count_max;
        }
        r_.count_min = std::min(r_.count_min, o.count_min);
        r_.count_max = std::max(r_.count_max, o.count_max);
        r_.n += o.n;
        r_.count_sum += o.count_sum;
        r_.count_sq_sum += o.count_sq_sum;
        for (int i = 0; i < kHistogramBins; ++i) r_.histogram[i] += o.histogram[i];
    }

    [[nodiscard]] MetricsReport report() const { return r_; }

private:
    MetricsReport r_;
};

inline std::uint32_t hd(std::uint64_t a, std::uint64_t b) { return static_cast<std::uint32_t>(std::popcount(a ^ b)); }

}  // namespace detail

inline MetricsReport uniformity(Packets keys) {
    if (keys.empty()) throw DomainError("uniformity: no keys");
    detail::Accumulator acc("uniformity");
    for (auto k : keys) acc.add(static_cast<std::uint32_t>(std::popcount(k)));
    return acc.report();
}

/// All K(K-1)/2 pairs of keys from one instance.
inline MetricsReport diffuseness(Packets keys) {
    if (keys.size() < 2) throw DomainError("diffuseness: need at least two keys");
    detail::Accumulator acc("diffuseness");
    for (std::size_t i = 0; i < keys.size(); ++i)
        for (std::size_t j = i + 1; j < keys.size(); ++j) acc.add(detail::hd(keys[i], keys[j]));
    return acc.report();
}

/// One sample per (trial, key position).
inline MetricsReport ber(Packets reference, const std::vector<std::vector<std::uint64_t>>& trials) {
    if (reference.empty()) throw DomainError("ber: empty reference");
    if (trials.empty()) throw DomainError("ber: no trials");
    detail::Accumulator acc("ber");
    for (const auto& t : trials) {
        if (t.size() != reference.size()) throw DomainError("ber: trial length does not match reference");
        for (std::size_t i = 0; i < t.size(); ++i) acc.add(detail::hd(reference[i], t[i]));
    }
    return acc.report();
}

inline MetricsReport uniqueness(Packets a, Packets b) {
    if (a.size() != b.size()) throw DomainError("uniqueness: key sets differ in length");
    if (a.empty()) throw DomainError("uniqueness: empty key sets");
    detail::Accumulator acc("uniqueness");
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(detail::hd(a[i], b[i]));
    return acc.report();
}

struct PairwiseMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<MetricsReport>> cells;   // symmetric, empty reports on the diagonal
    MetricsReport pooled;                            // all off-diagonal pairs i < j

    [[nodiscard]] Scalar mean(std::size_t i, std::size_t j) const { return cells[i][j].mean_pct(); }
    /// Mean and sample std of the per-pair means.
    [[nodiscard]] std::pair<Scalar, Scalar> pair_mean_std() const {
        std::vector<Scalar> v;
        for (std::size_t i = 0; i < cells.size(); ++i)
            for (std::size_t j = i + 1; j < cells.size(); ++j) v.push_back(cells[i][j].mean_pct());
        if (v.empty()) return {0.0, 0.0};
        Scalar m = 0.0;
        for (Scalar x : v) m += x;
        m /= static_cast<Scalar>(v.size());
        Scalar s = 0.0;
        for (Scalar x : v) s += (x - m) * (x - m);
        return {m, v.size() > 1 ? std::sqrt(s / static_cast<Scalar>(v.size() - 1)) : 0.0};
    }
};

/// Uniqueness between every pair of key sets answering the same challenges.
inline PairwiseMatrix pairwise_uniqueness(const std::vector<std::vector<std::uint64_t>>& sets,
                                          std::vector<std::string> labels, std::string metric = "uniqueness") {
    if (sets.empty()) throw DomainError("pairwise_uniqueness: no key sets");
    if (labels.size() != sets.size()) throw DomainError("pairwise_uniqueness: label count mismatch");
    for (const auto& s : sets)
        if (s.size() != sets.front().size()) throw DomainError("pairwise_uniqueness: inconsistent key counts");
    const std::size_t k = sets.size();
    PairwiseMatrix pm{std::move(labels), {}, {}};
    detail::Accumulator empty(metric), pooled(metric);
    pm.cells.assign(k, std::vector<MetricsReport>(k, empty.report()));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            MetricsReport r = uniqueness(sets[i], sets[j]);
            r.metric = metric;
            pooled.merge(r);
            pm.cells[i][j] = r;
            pm.cells[j][i] = r;
        }
    pm.pooled = pooled.report();
    return pm;
}

inline PairwiseMatrix inter_bias_matrix(const std::map<Scalar, std::vector<std::uint64_t>>& keys_by_bias) {
    std::vector<std::vector<std::uint64_t>> sets;
    std::vector<std::string> labels;
    char buf[32];
    for (const auto& [v, keys] : keys_by_bias) {
        std::snprintf(buf, sizeof buf, "%.0fmV", v * 1000.0);
        labels.emplace_back(buf);
        sets.push_back(keys);
    }
    return pairwise_uniqueness(sets, std::move(labels), "inter_bias_uniqueness");
}

struct QuaternaryReport {
    MetricsReport uf;
    MetricsReport df;                        // n = 0 with a single packet
    std::array<std::uint64_t, 4> symbol_counts{};

    [[nodiscard]] Scalar frequency_pct(unsigned s) const {
        std::uint64_t total = 0;
        for (auto c : symbol_counts) total += c;
        return total == 0 ? 0.0 : 100.0 * static_cast<Scalar>(symbol_counts[s]) / static_cast<Scalar>(total);
    }
};

/// Packets hold the 2-bit expansion of the symbols, 32 symbols each, high bit first.
inline QuaternaryReport quaternary_metrics(Packets packets) {
    if (packets.empty()) throw DomainError("quaternary_metrics: empty input");
    QuaternaryReport q;
    q.uf = uniformity(packets);
    q.uf.metric = "quaternary_uniformity";
    if (packets.size() >= 2) q.df = diffuseness(packets);
    q.df.metric = "quaternary_diffuseness";
    for (auto p : packets)
        for (int s = 0; s < kMetricBits / 2; ++s) ++q.symbol_counts[(p >> (kMetricBits - 2 - 2 * s)) & 3u];
    return q;
}

// =============================================================================
// Serialization
// =============================================================================

inline nlohmann::ordered_json to_json(const MetricsReport& r, bool with_histogram = true) {
    nlohmann::ordered_json j;
    j["metric"] = r.metric;
    j["mean_pct"] = r.mean_pct();
    j["std_pct"] = r.std_pct();
    j["min_pct"] = r.min_pct();
    j["max_pct"] = r.max_pct();
    j["n"] = r.n;
    if (with_histogram) j["histogram"] = r.histogram;
    return j;
}

inline nlohmann::ordered_json to_json(const QuaternaryReport& q) {
    nlohmann::ordered_json j;
    j["uniformity"] = to_json(q.uf);
    j["diffuseness"] = q.df.n ? to_json(q.df) : nlohmann::ordered_json();
    j["symbol_frequency_pct"] = {q.frequency_pct(0), q.frequency_pct(1), q.frequency_pct(2), q.frequency_pct(3)};
    return j;
}

inline nlohmann::ordered_json to_json(const PairwiseMatrix& m) {
    nlohmann::ordered_json j;
    j["labels"] = m.labels;
    j["pooled"] = to_json(m.pooled);
    const auto [mean, sd] = m.pair_mean_std();
    j["pair_mean_pct"] = mean;
    j["pair_std_pct"] = sd;
    return j;
}

/// Mean percentages as CSV with a label header row and column.
inline void write_matrix_csv(std::ostream& os, const PairwiseMatrix& m) {
    char buf[32];
    os << "label";
    for (const auto& l : m.labels) os << ',' << l;
    os << '\n';
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        os << m.labels[i];
        for (std::size_t j = 0; j < m.labels.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.6f", m.mean(i, j));
            os << ',' << buf;
        }
        os << '\n';
    }
}

}  // namespace nlpuf
