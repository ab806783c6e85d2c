#include <catch_amalgamated.hpp>

#include <cmath>

#include "nlpuf.hpp"

using namespace nlpuf;

namespace {

CrossbarArray fresh(std::uint64_t seed, int rows = 10, int cols = 10, ProcessVariation pv = {}) {
    Rng rng(seed);
    return CrossbarArray::sample(1, rows, cols, true, pv, rng);
}

std::vector<double> column_sums(const TargetDistribution& td) {
    std::vector<double> s(td.cols, 0.0);
    for (int r = 0; r < td.rows; ++r)
        for (int c = 0; c < td.cols; ++c) s[c] += td.at(0, r, c);
    return s;
}

}  // namespace

TEST_CASE("write-verify on one device", "[tuning]") {
    TuningPolicy pol;
    Rng rng(1);
    CrossbarArray a = fresh(1, 1, 1);

    SECTION("already at target") {
        CHECK(tune_device(a, 0, 0, 0, a.at(0, 0, 0).state.g_ref, pol, rng) == 0);
    }
    SECTION("ladder from 2 uS to 32 uS") {
        for (int i = 0; i < 16; ++i) {
            const double t = 2e-6 + i * 2e-6;
            tune_device(a, 0, 0, 0, t, pol, rng);
            const auto& d = a.at(0, 0, 0);
            CHECK(std::abs(device_conductance(d.state, d.params, d.params.v_ref) / t - 1.0) <= 0.01);
        }
        for (int i = 15; i >= 0; --i) {
            const double t = 2e-6 + i * 2e-6;
            tune_device(a, 0, 0, 0, t, pol, rng);
            CHECK(std::abs(a.at(0, 0, 0).state.g_ref / t - 1.0) <= 0.01);
        }
    }
    SECTION("out of range target") {
        CHECK_THROWS_AS(tune_device(a, 0, 0, 0, 2 * a.at(0, 0, 0).params.g_max, pol, rng), DomainError);
    }
    SECTION("defective device") {
        a.at(0, 0, 0).params.defect = true;
        CHECK_THROWS_AS(tune_device(a, 0, 0, 0, 20e-6, pol, rng), UntunableDevice);
    }
}

TEST_CASE("target distributions", "[tuning]") {
    const SelectionScheme scheme;
    SECTION("sigma_w = 0") {
        Rng rng(1);
        const auto td = generate_target_distribution(10, 10, 20e-6, 0.0, scheme, 0.02, rng);
        for (double t : td.targets) CHECK(t == 20e-6);
    }
    SECTION("mean over 50 runs and column balance") {
        double sum = 0.0;
        int n = 0;
        for (int seed = 0; seed < 50; ++seed) {
            Rng rng(100 + seed);
            const auto td = generate_target_distribution(10, 10, 20e-6, 6e-6, scheme, 0.02, rng);
            for (double t : td.targets) {
                CHECK(t >= 1e-6);
                CHECK(t <= 200e-6);
                sum += t;
                ++n;
            }
            const auto cs = column_sums(td);
            const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
            CHECK(*hi <= *lo * 1.02 * (1 + 1e-12));
        }
        CHECK(std::abs(sum / n - 20e-6) < 3 * 6e-6 / std::sqrt(n));
    }
    SECTION("deterministic given the seed") {
        Rng r1(5), r2(5);
        CHECK(generate_target_distribution(10, 10, 20e-6, 6e-6, scheme, 0.02, r1).targets ==
              generate_target_distribution(10, 10, 20e-6, 6e-6, scheme, 0.02, r2).targets);
    }
    SECTION("cross balancing equalises rows") {
        SelectionScheme s = scheme;
        s.cross_balance = 1.0;
        Rng rng(9);
        const auto td = generate_target_distribution(10, 10, 20e-6, 6e-6, s, 0.02, rng);
        std::vector<double> rows(10, 0.0);
        for (int r = 0; r < 10; ++r)
            for (int c = 0; c < 10; ++c) rows[r] += td.at(0, r, c);
        for (double x : rows) CHECK_THAT(x, Catch::Matchers::WithinRel(rows[0], 1e-8));
    }
    SECTION("infeasible requests") {
        Rng rng(1);
        CHECK_THROWS_AS(generate_target_distribution(10, 10, 300e-6, 6e-6, scheme, 0.02, rng), DomainError);
        CHECK_THROWS_AS(generate_target_distribution(10, 10, 20e-6, 6e-6, scheme, 0.0, rng), DomainError);
    }
}

TEST_CASE("array programming", "[tuning]") {
    TuningPolicy pol;
    Rng trng(3);
    const auto td = generate_target_distribution(10, 10, 20e-6, 6e-6, SelectionScheme{}, 0.02, trng);

    SECTION("fresh array reaches every target") {
        CrossbarArray a = fresh(4);
        Rng rng(4);
        const auto rep = program_array(a, td, pol, rng);
        CHECK(rep.failures == 0);
        for (const auto& d : rep.devices) {
            CHECK(d.status == TuneStatus::Ok);
            const auto& dev = a.at(d.layer, d.row, d.col);
            CHECK(std::abs(device_conductance(dev.state, dev.params, dev.params.v_ref) / d.target - 1.0) <=
                  pol.tolerance);
        }
        SECTION("programming again costs nothing") {
            CHECK(program_array(a, td, pol, rng).total_pulses == 0);
        }
        SECTION("rattling") {
            Rng rr(8);
            const auto same = rattle_array(a, 0.0, 10e-6, rr);
            for (std::size_t i = 0; i < a.device_count(); ++i)
                CHECK(same.array.devices()[i].state.g_ref == a.devices()[i].state.g_ref);

            std::vector<CrossbarArray> maps;
            for (int k = 0; k < 10; ++k) {
                const auto r = rattle_array(a, 0.7, 10e-6, rr);
                CHECK(r.pulses <= static_cast<long>(a.device_count()));
                CHECK(r.pulses <= rep.total_pulses);
                for (std::size_t i = 0; i < a.device_count(); ++i) {
                    CHECK(r.array.devices()[i].state.g_ref <= a.devices()[i].state.g_ref);
                    CHECK(r.array.devices()[i].state.g_ref >= a.devices()[i].params.g_min);
                }
                maps.push_back(r.array);
            }
            for (int i = 0; i < 10; ++i)
                for (int j = i + 1; j < 10; ++j) {
                    double worst = 0.0;
                    for (std::size_t d = 0; d < a.device_count(); ++d)
                        worst = std::max(worst, std::abs(maps[i].devices()[d].state.g_ref - maps[j].devices()[d].state.g_ref));
                    CHECK(worst > pol.tolerance * 20e-6);
                }
        }
    }
    SECTION("defective devices are reported") {
        ProcessVariation pv;
        pv.yield = 0.9;
        CrossbarArray a = fresh(6, 10, 10, pv);
        Rng rng(6);
        const auto rep = program_array(a, td, pol, rng);
        int defective = 0;
        for (const auto& d : rep.devices) defective += d.status == TuneStatus::Defective;
        CHECK(defective > 0);
        CHECK(rep.failures >= defective);
    }
}
