#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "nlpuf.hpp"

using namespace nlpuf;

namespace {

struct Programmed {
    ExperimentConfig cfg;
    CrossbarArray array;
    ChallengeSet cs;
};

Programmed programmed(std::uint64_t seed, std::size_t packets) {
    Programmed p;
    p.cfg.experiment.seed = seed;
    p.array = fabricate(p.cfg, 0);
    program(p.cfg, p.array, make_targets(p.cfg, 0), 0);
    p.cs = draw_challenges(p.cfg, packets * kPacketBits);
    return p;
}

double ber_at(const Programmed& p, const PerturbationModel& m, Scalar v, std::uint64_t stream) {
    FailureLog log;
    const std::size_t count = p.cs.challenges.size();
    const auto ref = respond_packets(p.array, p.cs, count, v, nullptr, ReadOptions{}, log, "ref").packets;
    Rng rr = make_stream(p.cfg.experiment.seed, "test/read", stream);
    const ReadEnvironment env{m, &rr, 1.0, true};
    const auto trial = respond_packets(p.array, p.cs, count, v, &env, ReadOptions{}, log, "trial").packets;
    return ber(ref, {trial}).mean_pct();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("zero model is the identity", "[environment]") {
    const PerturbationModel z = PerturbationModel::zero();
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto s = perturb_read(z, 0.4, 3e-6, rng);
        CHECK(s.v_b == 0.4);
        CHECK(s.current == 3e-6);
    }
    Rng fab(2);
    const CrossbarArray a = CrossbarArray::sample(1, 4, 4, true, ProcessVariation{}, fab);
    const CrossbarArray aged = age_array(a, z, 30.0, rng);
    const CrossbarArray hot = heat_array(a, z, 363.15, rng);
    for (std::size_t i = 0; i < a.device_count(); ++i) {
        CHECK(aged.devices()[i].state.g_ref == a.devices()[i].state.g_ref);
        CHECK(hot.devices()[i].state.g_ref == a.devices()[i].state.g_ref);
    }
}

TEST_CASE("supply and read noise", "[environment]") {
    PerturbationModel m;
    Rng rng(3);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Scalar v = perturb_supply(m, 0.5, rng);
        CHECK(v >= 0.5 * (1 - m.supply_frac));
        CHECK(v <= 0.5 * (1 + m.supply_frac));
        sum += perturb_current(m, 1e-6, rng);
    }
    CHECK(std::abs(sum / n - 1e-6) < 3 * m.sigma_read * 1e-6 / std::sqrt(n));
    m.supply_frac = 1.0;
    CHECK_THROWS_AS(m.validate(), DomainError);
}

TEST_CASE("aging", "[environment]") {
    PerturbationModel m;
    m.drift_sigma_per_day = 0.01;
    Rng fab(4);
    ProcessVariation pv;
    pv.g_init = 20e-6;
    pv.sigma_ln_g_init = 0.0;
    const CrossbarArray a = CrossbarArray::sample(1, 40, 40, true, pv, fab);
    Rng rng(5);
    const CrossbarArray same = age_array(a, m, 0.0, rng);
    for (std::size_t i = 0; i < a.device_count(); ++i) CHECK(same.devices()[i].state.g_ref == a.devices()[i].state.g_ref);

    auto var = [&](double days) {
        const CrossbarArray b = age_array(a, m, days, rng);
        double s = 0.0, s2 = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < a.device_count(); ++i) {
            if (a.devices()[i].params.defect) continue;
            const double x = std::log(b.devices()[i].state.g_ref / a.devices()[i].state.g_ref);
            s += x;
            s2 += x * x;
            ++n;
        }
        return s2 / n - (s / n) * (s / n);
    };
    for (double d : {4.0, 16.0, 36.0}) CHECK_THAT(var(d), Catch::Matchers::WithinRel(1e-4 * d, 0.15));
    CHECK_THROWS_AS(age_array(a, m, -1.0, rng), DomainError);
}

TEST_CASE("thermal factor", "[environment]") {
    const PerturbationModel m;
    CHECK(thermal_factor(m, m.temp_ref).factor == 1.0);
    CHECK(thermal_factor(m, m.temp_ref).noise_gain == 1.0);
    double prev = 0.0;
    for (double t = 250.0; t <= 400.0; t += 10.0) {
        const auto f = thermal_factor(m, t);
        CHECK(f.factor > prev);
        prev = f.factor;
    }
    CHECK(thermal_factor(m, 363.15).noise_gain > 1.0);
    CHECK_THROWS_AS(thermal_factor(m, 0.0), DomainError);
}

TEST_CASE("zeroed perturbations give zero BER", "[environment]") {
    const Programmed p = programmed(1, 2);
    for (Scalar v : {0.2, 0.4, 0.6}) CHECK(ber_at(p, PerturbationModel::zero(), v, 0) == 0.0);
}

TEST_CASE("BER grows with read noise", "[environment][slow]") {
    std::vector<double> lo, mid, hi;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Programmed p = programmed(seed, 3);
        PerturbationModel m = PerturbationModel::zero();
        m.sigma_read = 0.01;
        lo.push_back(ber_at(p, m, 0.4, seed));
        m.sigma_read = 0.05;
        mid.push_back(ber_at(p, m, 0.4, seed));
        m.sigma_read = 0.2;
        hi.push_back(ber_at(p, m, 0.4, seed));
    }
    CHECK(median(lo) <= median(mid));
    CHECK(median(mid) < median(hi));
}

TEST_CASE("signal grows with bias", "[environment]") {
    const Programmed p = programmed(1, 2);
    FailureLog log;
    const std::size_t count = p.cs.challenges.size();
    const double d2 = respond_packets(p.array, p.cs, count, 0.2, nullptr, ReadOptions{}, log, "").mean_abs_delta;
    const double d6 = respond_packets(p.array, p.cs, count, 0.6, nullptr, ReadOptions{}, log, "").mean_abs_delta;
    CHECK(d6 > d2);
}
