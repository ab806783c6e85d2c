#include <catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace nlpuf;

namespace {

void same(const MetricsReport& r, const oracle::Naive& n) {
    REQUIRE(r.n == static_cast<std::size_t>(n.n));
    REQUIRE(r.count_sum == static_cast<std::uint64_t>(n.sum));
    REQUIRE(static_cast<int>(r.count_min) == n.mn);
    REQUIRE(static_cast<int>(r.count_max) == n.mx);
    REQUIRE(r.mean_pct() == 100.0 * static_cast<double>(n.sum) / (static_cast<double>(n.n) * 64));
}

std::vector<std::uint64_t> random_keys(std::mt19937_64& rng, std::size_t n, double p) {
    std::bernoulli_distribution bit(p);
    std::vector<std::uint64_t> k(n, 0);
    for (auto& x : k)
        for (int i = 0; i < 64; ++i) x = (x << 1) | static_cast<std::uint64_t>(bit(rng));
    return k;
}

}  // namespace

TEST_CASE("metrics agree with the bit-loop oracle", "[metrics]") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> len(2, 24);
    std::uniform_real_distribution<double> p(0.05, 0.95);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = len(rng);
        const auto a = random_keys(rng, n, p(rng));
        const auto b = random_keys(rng, n, p(rng));
        const auto c = random_keys(rng, n, p(rng));
        same(uniformity(a), oracle::uf(a));
        same(diffuseness(a), oracle::df(a));
        same(uniqueness(a, b), oracle::pairwise(a, b));
        const MetricsReport e = ber(a, {b, c});
        auto nb = oracle::pairwise(a, b);
        const auto nc = oracle::pairwise(a, c);
        nb.sum += nc.sum;
        nb.n += nc.n;
        nb.mn = std::min(nb.mn, nc.mn);
        nb.mx = std::max(nb.mx, nc.mx);
        same(e, nb);
    }
}

TEST_CASE("fixed examples", "[metrics]") {
    const std::vector<std::uint64_t> ones{~0ULL}, alt{0x5555555555555555ULL}, zero{0ULL};
    CHECK(uniformity(ones).mean_pct() == 100.0);
    CHECK(uniformity(alt).mean_pct() == 50.0);
    CHECK(uniqueness(alt, alt).mean_pct() == 0.0);
    CHECK(uniqueness(ones, zero).mean_pct() == 100.0);
    CHECK(ber(ones, {ones}).mean_pct() == 0.0);
    CHECK(ber(ones, {{~0ULL ^ 8ULL}}).mean_pct() == 1.5625);
    CHECK(diffuseness(std::vector<std::uint64_t>{alt[0], alt[0]}).mean_pct() == 0.0);
    CHECK(diffuseness(std::vector<std::uint64_t>{alt[0], ~alt[0]}).mean_pct() == 100.0);

    // 8-bit toy keys in the top byte: 10110000, 10011010, 01110001 -> distances 3, 5, 4
    const std::vector<std::uint64_t> toy{0xb0ULL << 56, 0x9aULL << 56, 0x71ULL << 56};
    const MetricsReport d = diffuseness(toy);
    CHECK(d.n == 3);
    CHECK(d.count_sum == 12);

    CHECK_THROWS_AS(uniformity({}), DomainError);
    CHECK_THROWS_AS(diffuseness(ones), DomainError);
    CHECK_THROWS_AS(uniqueness(ones, std::vector<std::uint64_t>{1, 2}), DomainError);
}

TEST_CASE("metric properties", "[metrics]") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_keys(rng, 16, 0.5), b = random_keys(rng, 16, 0.3), c = random_keys(rng, 16, 0.7);
        std::vector<std::uint64_t> na(a.size());
        std::transform(a.begin(), a.end(), na.begin(), [](std::uint64_t x) { return ~x; });
        CHECK(uniformity(a).count_sum + uniformity(na).count_sum == 16 * 64);
        CHECK(uniqueness(a, b).count_sum == uniqueness(b, a).count_sum);
        CHECK(uniqueness(a, c).count_sum <= uniqueness(a, b).count_sum + uniqueness(b, c).count_sum);
    }
    const auto k = random_keys(rng, 40, 0.5);
    CHECK(diffuseness(k).n == 40 * 39 / 2);
    const auto r = uniformity(k);
    std::uint64_t total = 0;
    for (auto h : r.histogram) total += h;
    CHECK(total == r.n);
}

TEST_CASE("pairwise and inter-bias matrices", "[metrics]") {
    std::mt19937_64 rng(3);
    const auto single = inter_bias_matrix({{0.2, random_keys(rng, 8, 0.5)}});
    CHECK(single.labels == std::vector<std::string>{"200mV"});
    CHECK(single.mean(0, 0) == 0.0);

    std::vector<std::vector<std::uint64_t>> sets;
    for (int i = 0; i < 4; ++i) sets.push_back(random_keys(rng, 8, 0.5));
    const auto m = pairwise_uniqueness(sets, {"a", "b", "c", "d"});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(m.mean(i, j) == m.mean(j, i));
    CHECK(m.pooled.n == 6 * 8);

    std::ostringstream os;
    write_matrix_csv(os, m);
    CHECK(os.str().rfind("label,a,b,c,d\na,0.000000,", 0) == 0);
}

TEST_CASE("quaternary metrics", "[metrics]") {
    const auto z = quaternary_metrics(std::vector<std::uint64_t>{0ULL, 0ULL});
    CHECK(z.uf.mean_pct() == 0.0);
    CHECK(z.frequency_pct(0) == 100.0);
    // symbols 0,1,2,3 repeated
    const auto q = quaternary_metrics(std::vector<std::uint64_t>{0x1b1b1b1b1b1b1b1bULL});
    for (unsigned s = 0; s < 4; ++s) CHECK(q.frequency_pct(s) == 25.0);
    CHECK(q.df.n == 0);
}
