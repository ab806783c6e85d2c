// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace nlpuf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;
std::map<int, std::string> lines;   // printed in criterion order at the end

void report(int id, bool ok, const std::string& detail) {
    char head[32];
    std::snprintf(head, sizeof head, "%s  C%-2d ", ok ? "PASS" : "FAIL", id);
    lines[id] = head + detail;
    std::fprintf(stderr, "%s\n", lines[id].c_str());
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1
void solver_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> dim(1, 4);
    double worst = 0.0, worst_res = 0.0;
    bool ok = true;
    for (int i = 0; i < 200; ++i) {
        const CrossbarArray a = oracle::random_array(dim(rng), dim(rng), false, rng);
        const BiasConfig b = oracle::random_bias(a, 3, rng);
        const SolveResult r = solve_network(a, b);
        const auto v = oracle::kcl_bisection(a, b);
        for (int l = 0; l < a.line_count(); ++l) worst = std::max(worst, std::abs(r.line_voltage[l] - v[l]));
        worst_res = std::max(worst_res, r.residual);
        ok = ok && r.residual <= r.tolerance;
    }
    const double s = seconds_since(t0);
    report(1, ok && worst <= 1e-6 && s < 10.0,
           fmt("solver vs KCL bisection: max |dV| %.2e V, max residual %.2e A, %.2f s", worst, worst_res, s));
}

// 2
void linear_reduction() {
    std::mt19937_64 rng(1002);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const CrossbarArray a = oracle::random_array(10, 10, true, rng);
        const BiasConfig b = oracle::random_bias(a, 20, rng);
        const SolveResult r = solve_network(a, b);
        const auto s = oracle::linear_solve(a, b);
        double vscale = 0.0, iscale = 0.0;
        for (int l = 0; l < a.line_count(); ++l) {
            vscale = std::max(vscale, std::abs(s.v[l]));
            iscale = std::max(iscale, std::abs(s.terminal[l]));
        }
        for (int l = 0; l < a.line_count(); ++l) {
            worst = std::max(worst, std::abs(r.line_voltage[l] - s.v[l]) / vscale);
            if (b[l].fixed() && iscale > 0.0)
                worst = std::max(worst, std::abs(r.terminal_current[l] - s.terminal[l]) / iscale);
        }
    }
    report(2, worst <= 1e-10, fmt("linear limit vs direct solve: max relative error %.2e", worst));
}

// 3
std::uint64_t enumerate(int M, int N, int m, int n, int free, bool partitions) {
    std::uint64_t count = 0;
    for (unsigned cm = 0; cm < (1u << M); ++cm) {
        if (std::popcount(cm) != m) continue;
        for (unsigned rm = 0; rm < (1u << N); ++rm) {
            if (std::popcount(rm) != n) continue;
            std::uint64_t parts = 1;
            if (partitions) {
                parts = 0;
                const unsigned low = rm & -rm;
                for (unsigned g = rm; g; g = (g - 1) & rm)
                    if (std::popcount(g) == n / 2 && (g & low)) ++parts;
            }
            count += parts << free;
        }
    }
    return count;
}

void combinatorics() {
    long checked = 0, bad = 0;
    for (int M = 1; M <= 8; ++M)
        for (int N = 2; N <= 8; ++N)
            for (int m = 0; m <= M; ++m)
                for (int n = 2; n <= N; n += 2)
                    for (auto pol : {UnselectedPolicy::AllFloating, UnselectedPolicy::Configurable}) {
                        const ChallengeDims d{M, N, m, n};
                        if (crp_count(d, pol) > 100000) continue;
                        const int free = free_lines(d, pol);
                        ++checked;
                        bad += crp_count(d, pol) != enumerate(M, N, m, n, free, false);
                        bad += challenge_space(d, pol) != enumerate(M, N, m, n, free, true);
                    }

    // two-layer input space against a product of enumerated segment spaces
    for (int M = 1; M <= 4; ++M)
        for (int N = 2; N <= 4; N += 2)
            for (int l = 1; l <= 3; ++l)
                for (int k = 1; k <= 3; ++k) {
                    NlrpufConfig c;
                    c.l = l;
                    c.k = k;
                    c.segment = c.output = ChallengeDims{M, N, (M + 1) / 2, 2};
                    const std::uint64_t seg = enumerate(M, N, (M + 1) / 2, 2, 0, true);
                    std::uint64_t want = 1;
                    for (int i = 0; i < l; ++i) want *= seg;
                    if (want << k > 100000) continue;
                    ++checked;
                    bad += nlrpuf_input_space(c) != BigInt(want << k);
                    std::set<std::string> seen;
                    for (std::uint64_t r = 0; r < (want << k); ++r) {
                        const auto in = nlrpuf_input_from_rank(c, r);
                        bad += nlrpuf_rank_from_input(c, in) != r;
                        std::string key = std::to_string(in.bias_code);
                        for (const auto& ch : in.segment_challenges) key += "|" + to_string(ch, c.segment);
                        seen.insert(key);
                    }
                    bad += seen.size() != (want << k);
                }

    long bijection_bad = 0;
    for (int m = 0; m <= 4; ++m)
        for (int n = 2; n <= 4; n += 2)
            for (auto pol : {UnselectedPolicy::AllFloating, UnselectedPolicy::Configurable}) {
                const ChallengeDims d{4, 4, m, n};
                const auto space = static_cast<std::uint64_t>(challenge_space(d, pol));
                std::set<std::string> seen;
                for (std::uint64_t r = 0; r < space; ++r) {
                    const Challenge ch = challenge_from_rank(r, d, pol);
                    bijection_bad += rank_from_challenge(ch, d, pol) != r;
                    seen.insert(to_string(ch, d));
                }
                bijection_bad += seen.size() != space;
            }
    Rng rng(1003);
    for (auto pol : {UnselectedPolicy::AllFloating, UnselectedPolicy::Configurable}) {
        const ChallengeDims d{10, 10, 5, 2};
        for (const auto& r : sample_ranks(challenge_space(d, pol), 10000, rng)) {
            const Challenge ch = challenge_from_rank(r, d, pol);
            bijection_bad += rank_from_challenge(ch, d, pol) != r;
            bijection_bad += !(parse_challenge(to_string(ch, d), d) == ch);
        }
    }
    report(3, bad == 0 && bijection_bad == 0,
           fmt("%ld shapes enumerated, %ld count mismatches, %ld bijection errors", checked, bad, bijection_bad));
}

// 4
bool same(const MetricsReport& r, const oracle::Naive& n) {
    return r.n == static_cast<std::size_t>(n.n) && r.count_sum == static_cast<std::uint64_t>(n.sum) &&
           static_cast<int>(r.count_min) == n.mn && static_cast<int>(r.count_max) == n.mx;
}

void metric_oracles() {
    std::mt19937_64 rng(1004);
    std::uniform_int_distribution<int> len(2, 32);
    std::uniform_real_distribution<double> pr(0.05, 0.95);
    auto keys = [&](std::size_t n) {
        std::bernoulli_distribution bit(pr(rng));
        std::vector<std::uint64_t> k(n, 0);
        for (auto& x : k)
            for (int i = 0; i < 64; ++i) x = (x << 1) | static_cast<std::uint64_t>(bit(rng));
        return k;
    };
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = len(rng);
        const auto a = keys(n), b = keys(n);
        bad += !same(uniformity(a), oracle::uf(a));
        bad += !same(diffuseness(a), oracle::df(a));
        bad += !same(uniqueness(a, b), oracle::pairwise(a, b));
        bad += !same(ber(a, {b}), oracle::pairwise(a, b));
    }
    report(4, bad == 0, fmt("UF/DF/BER/UQ vs bit loops on 1000 key sets: %d mismatches", bad));
}

ExperimentConfig seeded(std::uint64_t seed) {
    ExperimentConfig c;
    c.experiment.seed = seed;
    return c;
}

double summary_mean(const nlohmann::ordered_json& j) { return j["mean_pct"].get<double>(); }

// 5, 6, 8
void fig3_criteria() {
    const std::vector<std::string> biases{"200mV", "400mV", "600mV"};
    const auto t0 = Clock::now();
    bool rand_ok = true;
    std::string rand_detail;
    double uq24 = 0.0, uq26 = 0.0;
    std::map<std::string, std::vector<double>> aging, thermal;
    const int seeds = 5;
    for (int seed = 1; seed <= seeds; ++seed) {
        const auto r = run_experiment(seeded(seed), "fig3");
        const auto& s = r.summary["fig3"];
        rand_detail += fmt(" s%d:", seed);
        for (const auto& b : biases) {
            const double uf = summary_mean(s["uniformity"][b]);
            const double df = summary_mean(s["diffuseness"][b]);
            rand_ok = rand_ok && uf >= 45.0 && uf <= 55.0 && df >= 45.0 && df <= 55.0;
            rand_detail += fmt(" %.1f/%.1f", uf, df);
            aging[b].push_back(summary_mean(s["ber_aging"][b]));
            thermal[b].push_back(summary_mean(s["ber_thermal"][b]));
        }
        const auto& m = s["inter_bias"]["mean_pct"];
        uq24 += m[0][1].get<double>() / seeds;
        uq26 += m[0][2].get<double>() / seeds;
    }
    const double s5 = seconds_since(t0) / seeds;
    report(5, rand_ok && s5 < 300.0, fmt("UF/DF at 200/400/600 mV per seed:%s; %.1f s per seed", rand_detail.c_str(), s5));
    report(6, uq26 >= uq24 && uq24 >= 5.0 && uq26 >= 30.0,
           fmt("inter-bias UQ over 5 seeds: (200,400) %.2f%%, (200,600) %.2f%%", uq24, uq26));

    const double a2 = median(aging["200mV"]), a4 = median(aging["400mV"]), a6 = median(aging["600mV"]);
    const double h2 = median(thermal["200mV"]), h4 = median(thermal["400mV"]), h6 = median(thermal["600mV"]);

    ExperimentConfig z = seeded(1);
    z.perturbation = PerturbationModel::zero();
    z.puf.packets = 10;
    z.reliability.ber_packets = 10;
    const auto zr = run_experiment(z, "fig3").summary["fig3"];
    double zmax = 0.0;
    for (const auto& b : biases)
        zmax = std::max({zmax, summary_mean(zr["ber_aging"][b]), summary_mean(zr["ber_thermal"][b])});
    report(8, a6 < a4 && a4 < a2 && h6 < h4 && h4 < h2 && zmax == 0.0,
           fmt("seed-median BER aging %.2f > %.2f > %.2f, thermal %.2f > %.2f > %.2f, zeroed %.2f", a2, a4, a6, h2, h4,
               h6, zmax));
}

// 7
void fig4_criteria() {
    const std::vector<std::string> biases{"200mV", "400mV", "600mV"};
    const int seeds = 3;
    std::map<std::string, double> retuned, rattled;
    for (int seed = 1; seed <= seeds; ++seed) {
        const auto s = run_experiment(seeded(seed), "fig4").summary["fig4"];
        for (const auto& b : biases) {
            retuned[b] += summary_mean(s["retuned"][b]) / seeds;
            rattled[b] += summary_mean(s["rattled"][b]) / seeds;
        }
    }
    bool ok = true;
    for (const auto& b : biases) ok = ok && retuned[b] >= 45.0 && retuned[b] <= 55.0;
    ok = ok && rattled["200mV"] < rattled["400mV"] && rattled["400mV"] < rattled["600mV"] && rattled["600mV"] >= 40.0 &&
         rattled["600mV"] <= 60.0;
    report(7, ok,
           fmt("UQ over seeds 1-3: retuned %.2f/%.2f/%.2f, rattled %.2f/%.2f/%.2f", retuned["200mV"], retuned["400mV"],
               retuned["600mV"], rattled["200mV"], rattled["400mV"], rattled["600mV"]));
}

// 9
void fig5_criteria() {
    const auto t0 = Clock::now();
    const auto s = run_experiment(seeded(1), "fig5").summary["fig5"];
    const double secs = seconds_since(t0);
    const double uf = summary_mean(s["multibias"]["uniformity"]);
    const double df = summary_mean(s["multibias"]["diffuseness"]);
    const auto& f = s["quaternary"]["symbol_frequency_pct"];
    bool ok = secs < 600.0 && uf >= 45.0 && uf <= 55.0 && df >= 45.0 && df <= 55.0;
    for (const auto& x : f) ok = ok && x.get<double>() >= 15.0 && x.get<double>() <= 35.0;
    report(9, ok,
           fmt("multi-bias UF %.2f%% DF %.2f%%, symbols %.1f/%.1f/%.1f/%.1f%%, %.0f s", uf, df, f[0].get<double>(),
               f[1].get<double>(), f[2].get<double>(), f[3].get<double>(), secs));
}

// 10
std::map<std::string, std::string> tree_hashes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream is(e.path(), std::ios::binary);
        out[fs::relative(e.path(), dir).generic_string()] = sha256_hex({std::istreambuf_iterator<char>(is), {}});
    }
    return out;
}

void determinism() {
    ExperimentConfig c = seeded(7);
    c.puf.packets = 4;
    c.reliability.ber_packets = 2;
    c.experiment.retuned_instances = 2;
    c.experiment.rattled_instances = 2;
    c.experiment.nlrpuf_keys = 2;
    c.puf.l = 4;
    const fs::path base = fs::temp_directory_path() / "nlpuf_acceptance";
    fs::remove_all(base);
    write_report(run_experiment(c, "all").artifacts, base / "a");
    write_report(run_experiment(c, "all").artifacts, base / "b");
    const auto ha = tree_hashes(base / "a"), hb = tree_hashes(base / "b");
    report(10, !ha.empty() && ha == hb, fmt("two 'all' runs: %zu files each, trees identical: %s", ha.size(),
                                            ha == hb ? "yes" : "no"));
    fs::remove_all(base);
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> steps{solver_oracle, linear_reduction, combinatorics, metric_oracles,
                                                   fig3_criteria, fig4_criteria,    fig5_criteria, determinism};
    for (const auto& step : steps) {
        try {
            step();
        } catch (const std::exception& e) {
            std::printf("FAIL  error: %s\n", e.what());
            ++failures;
        }
    }
    for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
    std::printf("%s: %d failing\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
