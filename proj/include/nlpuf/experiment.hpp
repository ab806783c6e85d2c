#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "nlpuf/challenge.hpp"
#include "nlpuf/config.hpp"
#include "nlpuf/crossbar.hpp"
#include "nlpuf/environment.hpp"
#include "nlpuf/metrics.hpp"
#include "nlpuf/nlrpuf.hpp"
#include "nlpuf/response.hpp"
#include "nlpuf/tuning.hpp"

namespace nlpuf {

// =============================================================================
// Artifacts and manifest
// =============================================================================

struct Artifact {
    std::string path;      // relative, '/'-separated
    std::string content;
};

class ArtifactSet {
public:
    void add(std::string path, std::string content) {
        for (const auto& a : items_)
            if (a.path == path) throw Error("artifact written twice: " + path);
        items_.push_back({std::move(path), std::move(content)});
    }
    void add_json(std::string path, const nlohmann::ordered_json& j) { add(std::move(path), j.dump(2) + "\n"); }

    [[nodiscard]] const std::vector<Artifact>& items() const { return items_; }
    [[nodiscard]] const Artifact* find(const std::string& path) const {
        for (const auto& a : items_)
            if (a.path == path) return &a;
        return nullptr;
    }

private:
    std::vector<Artifact> items_;
};

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline constexpr const char* kManifestName = "manifest.json";

/// Writes every artifact under `dir` plus manifest.json listing (path, bytes, sha256) by path.
inline nlohmann::ordered_json write_report(const ArtifactSet& artifacts, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<const Artifact*> sorted;
    for (const auto& a : artifacts.items()) sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(), [](const Artifact* a, const Artifact* b) { return a->path < b->path; });

    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const Artifact* a : sorted) {
        if (a->path == kManifestName) throw Error("artifact name collides with the manifest");
        const fs::path p = dir / fs::path(a->path);
        fs::create_directories(p.parent_path());
        std::ofstream os(p, std::ios::binary);
        if (!(os << a->content)) throw Error("cannot write " + p.string());
        files.push_back({{"path", a->path}, {"bytes", a->content.size()}, {"sha256", sha256_hex(a->content)}});
    }
    nlohmann::ordered_json manifest;
    manifest["files"] = files;
    fs::create_directories(dir);
    std::ofstream os(dir / kManifestName, std::ios::binary);
    if (!(os << manifest.dump(2) << '\n')) throw Error("cannot write manifest");
    return manifest;
}

// =============================================================================
// Building blocks
// =============================================================================

inline std::string mv_label(Scalar v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0fmV", v * 1000.0);
    return buf;
}

inline std::string hex_text(const std::vector<std::uint64_t>& packets) {
    std::ostringstream os;
    write_hex(os, packets);
    return os.str();
}

inline std::string map_text(const CrossbarArray& a) {
    std::ostringstream os;
    write_map(os, a);
    return os.str();
}

inline std::string shift_map_text(const CrossbarArray& a) {
    std::ostringstream os;
    write_shift_map(os, a);
    return os.str();
}

/// Physical array of instance `index`: parameters and pristine state.
inline CrossbarArray fabricate(const ExperimentConfig& cfg, std::uint64_t index = 0) {
    Rng rng = make_stream(cfg.experiment.seed, "fab", index);
    return CrossbarArray::sample(cfg.array.layers, cfg.array.rows, cfg.array.cols, cfg.array.shared_middle,
                                 cfg.process, rng);
}

inline TargetDistribution make_targets(const ExperimentConfig& cfg, std::uint64_t index = 0) {
    Rng rng = make_stream(cfg.experiment.seed, "targets", index);
    const SelectionScheme scheme{cfg.puf.m, cfg.puf.n, cfg.puf.transpose, cfg.targets.cross_balance};
    return generate_target_distribution(cfg.array.rows, cfg.array.cols, cfg.targets.mu_w, cfg.targets.sigma_w, scheme,
                                        cfg.targets.margin, rng,
                                        {cfg.process.nominal.g_min, cfg.process.nominal.g_max}, cfg.array.layers);
}

inline ProgramReport program(const ExperimentConfig& cfg, CrossbarArray& array, const TargetDistribution& targets,
                             std::uint64_t index = 0) {
    Rng rng = make_stream(cfg.experiment.seed, "tune", index);
    return program_array(array, targets, cfg.tuning, rng);
}

inline nlohmann::ordered_json to_json(const ProgramReport& rep) {
    nlohmann::ordered_json devices = nlohmann::ordered_json::array();
    for (const auto& d : rep.devices) {
        const char* status = d.status == TuneStatus::Ok ? "ok" : d.status == TuneStatus::Defective ? "defective" : "untunable";
        devices.push_back({{"layer", d.layer}, {"row", d.row}, {"col", d.col}, {"target_us", d.target * 1e6},
                           {"final_us", d.final_g * 1e6}, {"rel_error", d.rel_error()}, {"pulses", d.pulses},
                           {"status", status}});
    }
    nlohmann::ordered_json j;
    j["total_pulses"] = rep.total_pulses;
    j["failures"] = rep.failures;
    j["devices"] = devices;
    return j;
}

struct ChallengeSet {
    ChallengeDims dims;
    std::vector<BigInt> ranks;
    std::vector<Challenge> challenges;
};

inline ChallengeSet draw_challenges(const ExperimentConfig& cfg, std::size_t count, std::string_view label = "challenges") {
    Rng rng = make_stream(cfg.experiment.seed, label, 0);
    ChallengeSet cs{cfg.dims(), {}, {}};
    cs.ranks = sample_ranks(challenge_space(cs.dims, cfg.puf.unselected), count, rng);
    cs.challenges.reserve(count);
    for (const auto& r : cs.ranks) cs.challenges.push_back(challenge_from_rank(r, cs.dims, cfg.puf.unselected));
    return cs;
}

inline std::string challenges_text(const ChallengeSet& cs) {
    std::string s;
    for (const auto& ch : cs.challenges) s += to_string(ch, cs.dims) + "\n";
    return s;
}

/// Solver failures are recorded (bit 0) instead of aborting a run.
struct FailureLog {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();

    void record(const std::string& where, const BigInt& rank, Scalar v_b, const std::exception& e) {
        entries.push_back({{"where", where}, {"rank", rank.str()}, {"v_b", v_b}, {"error", e.what()}});
    }
};

struct KeyRun {
    std::vector<std::uint64_t> packets;
    Scalar mean_abs_delta = 0.0;   // A
};

/// First `count` challenges of the set answered at v_b; count must fill whole packets.
inline KeyRun respond_packets(const CrossbarArray& array, const ChallengeSet& cs, std::size_t count, Scalar v_b,
                              const ReadEnvironment* env, const ReadOptions& opt, FailureLog& log,
                              const std::string& where) {
    if (count == 0 || count % kPacketBits != 0 || count > cs.challenges.size())
        throw DomainError("respond_packets: challenge count must be a positive multiple of 64");
    ResponseKey key;
    Scalar sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        Scalar d = 0.0;
        try {
            d = respond_delta(array, cs.challenges[i], v_b, env, opt);
        } catch (const SolverError& e) {
            log.record(where, cs.ranks[i], v_b, e);
        }
        sum += std::abs(d);
        key.push_bit(d > 0.0);
    }
    return {key.packets(), sum / static_cast<Scalar>(count)};
}

inline ReadOptions read_options(const ExperimentConfig& cfg) {
    ReadOptions opt;
    opt.transpose = cfg.puf.transpose;
    opt.solver = cfg.array.solver;
    return opt;
}

inline nlohmann::ordered_json brief(const MetricsReport& r) {
    return {{"mean_pct", r.mean_pct()}, {"std_pct", r.std_pct()}, {"n", r.n}};
}

inline nlohmann::ordered_json matrix_json(const PairwiseMatrix& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t j = 0; j < m.labels.size(); ++j) row.push_back(m.mean(i, j));
        rows.push_back(row);
    }
    return {{"labels", m.labels}, {"mean_pct", rows}};
}

inline std::string matrix_text(const PairwiseMatrix& m) {
    std::ostringstream os;
    write_matrix_csv(os, m);
    return os.str();
}

// =============================================================================
// Experiments
// =============================================================================

struct ExperimentResult {
    std::string name;
    ArtifactSet artifacts;
    nlohmann::ordered_json summary;
};

using Logger = std::function<void(const std::string&)>;

namespace detail {

inline void log_line(const Logger& log, const std::string& s) {
    if (log) log(s);
}

inline void add_instance_maps(ArtifactSet& out, const std::string& stem, const CrossbarArray& a) {
    out.add(stem + ".csv", map_text(a));
    out.add(stem + ".shift.csv", shift_map_text(a));
}

}  // namespace detail

/// Randomness at every bias, inter-bias uniqueness, and BER under aging and heat.
inline void run_fig3(const ExperimentConfig& cfg, ExperimentResult& res, const Logger& log) {
    const ReadOptions opt = read_options(cfg);
    FailureLog failures;
    CrossbarArray array = fabricate(cfg, 0);
    const TargetDistribution targets = make_targets(cfg, 0);
    const ProgramReport rep = program(cfg, array, targets, 0);
    detail::add_instance_maps(res.artifacts, "fig3/array", array);
    res.artifacts.add_json("fig3/tuning.json", to_json(rep));

    const std::size_t count = static_cast<std::size_t>(cfg.puf.packets) * kPacketBits;
    const ChallengeSet cs = draw_challenges(cfg, count);
    res.artifacts.add("fig3/challenges.txt", challenges_text(cs));

    nlohmann::ordered_json uf, df, signal;
    std::map<Scalar, std::vector<std::uint64_t>> by_bias;
    for (Scalar v : cfg.puf.biases) {
        detail::log_line(log, "fig3: responses at " + mv_label(v));
        const KeyRun run = respond_packets(array, cs, count, v, nullptr, opt, failures, "fig3/" + mv_label(v));
        const MetricsReport u = uniformity(run.packets);
        res.artifacts.add("fig3/keys_" + mv_label(v) + ".hex", hex_text(run.packets));
        res.artifacts.add_json("fig3/uniformity_" + mv_label(v) + ".json", to_json(u));
        uf[mv_label(v)] = brief(u);
        if (run.packets.size() >= 2) {
            const MetricsReport d = diffuseness(run.packets);
            res.artifacts.add_json("fig3/diffuseness_" + mv_label(v) + ".json", to_json(d));
            df[mv_label(v)] = brief(d);
        }
        signal[mv_label(v)] = run.mean_abs_delta;
        by_bias[v] = run.packets;
    }
    const PairwiseMatrix ib = inter_bias_matrix(by_bias);
    res.artifacts.add("fig3/inter_bias.csv", matrix_text(ib));

    // reliability: noise-free day-0 enrollment against perturbed trials
    const std::size_t ber_count =
        std::min(count, static_cast<std::size_t>(cfg.reliability.ber_packets) * kPacketBits);
    const auto& pm = cfg.perturbation;
    nlohmann::ordered_json ber_aging, ber_thermal;
    std::map<Scalar, std::vector<std::vector<std::uint64_t>>> aging_trials, thermal_trials;
    {
        Rng drift = make_stream(cfg.experiment.seed, "aging", 0);
        CrossbarArray aged = array;
        Scalar prev = 0.0;
        for (std::size_t t = 0; t < cfg.reliability.aging_days.size(); ++t) {
            const Scalar day = cfg.reliability.aging_days[t];
            aged = age_array(aged, pm, std::max(0.0, day - prev), drift);
            prev = std::max(prev, day);
            for (std::size_t b = 0; b < cfg.puf.biases.size(); ++b) {
                const Scalar v = cfg.puf.biases[b];
                Rng rr = make_stream(cfg.experiment.seed, "read/aging", t * cfg.puf.biases.size() + b);
                const ReadEnvironment env{pm, &rr, 1.0, true};
                aging_trials[v].push_back(
                    respond_packets(aged, cs, ber_count, v, &env, opt, failures, "fig3/aging").packets);
            }
        }
    }
    {
        const ThermalFactor tf = thermal_factor(pm, cfg.reliability.hot_temperature);
        for (int t = 0; t < cfg.reliability.thermal_trials; ++t) {
            Rng heat = make_stream(cfg.experiment.seed, "heat", static_cast<std::uint64_t>(t));
            const CrossbarArray hot = heat_array(array, pm, cfg.reliability.hot_temperature, heat);
            for (std::size_t b = 0; b < cfg.puf.biases.size(); ++b) {
                const Scalar v = cfg.puf.biases[b];
                Rng rr = make_stream(cfg.experiment.seed, "read/thermal", t * cfg.puf.biases.size() + b);
                const ReadEnvironment env{pm, &rr, tf.noise_gain, false};
                thermal_trials[v].push_back(
                    respond_packets(hot, cs, ber_count, v, &env, opt, failures, "fig3/thermal").packets);
            }
        }
    }
    for (Scalar v : cfg.puf.biases) {
        const std::vector<std::uint64_t> ref(by_bias[v].begin(), by_bias[v].begin() + ber_count / kPacketBits);
        const MetricsReport a = ber(ref, aging_trials[v]);
        const MetricsReport h = ber(ref, thermal_trials[v]);
        res.artifacts.add_json("fig3/ber_aging_" + mv_label(v) + ".json", to_json(a));
        res.artifacts.add_json("fig3/ber_thermal_" + mv_label(v) + ".json", to_json(h));
        ber_aging[mv_label(v)] = brief(a);
        ber_thermal[mv_label(v)] = brief(h);
    }

    nlohmann::ordered_json s;
    s["uniformity"] = uf;
    s["diffuseness"] = df;
    s["inter_bias"] = matrix_json(ib);
    s["ber_aging"] = ber_aging;
    s["ber_thermal"] = ber_thermal;
    s["mean_abs_delta_a"] = signal;
    s["tuning_pulses"] = rep.total_pulses;
    s["tuning_failures"] = rep.failures;
    s["solver_failures"] = failures.entries.size();
    res.artifacts.add_json("fig3/solver_failures.json", failures.entries);
    res.summary["fig3"] = s;
}

/// Uniqueness between retuned instances and between rattled instances of one array.
inline void run_fig4(const ExperimentConfig& cfg, ExperimentResult& res, const Logger& log) {
    const ReadOptions opt = read_options(cfg);
    FailureLog failures;
    const CrossbarArray base = fabricate(cfg, 0);
    const std::size_t count = static_cast<std::size_t>(cfg.puf.packets) * kPacketBits;
    const ChallengeSet cs = draw_challenges(cfg, count);

    std::map<Scalar, std::vector<std::vector<std::uint64_t>>> retuned, rattled;
    std::vector<std::string> retuned_labels, rattled_labels;
    long retune_pulses = 0, rattle_pulses = 0;
    CrossbarArray programmed;
    for (int i = 0; i < cfg.experiment.retuned_instances; ++i) {
        detail::log_line(log, "fig4: retuned instance " + std::to_string(i));
        CrossbarArray inst = base;
        const ProgramReport rep = program(cfg, inst, make_targets(cfg, i), i);
        retune_pulses += rep.total_pulses;
        if (i == 0) programmed = inst;
        detail::add_instance_maps(res.artifacts, "fig4/retuned_" + std::to_string(i), inst);
        retuned_labels.push_back("retuned_" + std::to_string(i));
        for (Scalar v : cfg.puf.biases)
            retuned[v].push_back(respond_packets(inst, cs, count, v, nullptr, opt, failures, "fig4/retuned").packets);
    }
    for (int j = 0; j < cfg.experiment.rattled_instances; ++j) {
        detail::log_line(log, "fig4: rattled instance " + std::to_string(j));
        Rng rng = make_stream(cfg.experiment.seed, "rattle", static_cast<std::uint64_t>(j));
        const RattleResult rr = rattle_array(programmed, cfg.targets.rattle_fraction, cfg.targets.rattle_width, rng);
        rattle_pulses += rr.pulses;
        detail::add_instance_maps(res.artifacts, "fig4/rattled_" + std::to_string(j), rr.array);
        rattled_labels.push_back("rattled_" + std::to_string(j));
        for (Scalar v : cfg.puf.biases)
            rattled[v].push_back(respond_packets(rr.array, cs, count, v, nullptr, opt, failures, "fig4/rattled").packets);
    }

    nlohmann::ordered_json s, sr, sa;
    for (Scalar v : cfg.puf.biases) {
        const PairwiseMatrix mr = pairwise_uniqueness(retuned[v], retuned_labels);
        const PairwiseMatrix ma = pairwise_uniqueness(rattled[v], rattled_labels);
        res.artifacts.add("fig4/uq_retuned_" + mv_label(v) + ".csv", matrix_text(mr));
        res.artifacts.add("fig4/uq_rattled_" + mv_label(v) + ".csv", matrix_text(ma));
        res.artifacts.add_json("fig4/uq_retuned_" + mv_label(v) + ".json", to_json(mr));
        res.artifacts.add_json("fig4/uq_rattled_" + mv_label(v) + ".json", to_json(ma));
        const auto [rm, rs] = mr.pair_mean_std();
        const auto [am, as] = ma.pair_mean_std();
        sr[mv_label(v)] = {{"mean_pct", rm}, {"std_pct", rs}, {"pairs", mr.pooled.n / (count / kPacketBits)}};
        sa[mv_label(v)] = {{"mean_pct", am}, {"std_pct", as}, {"pairs", ma.pooled.n / (count / kPacketBits)}};
    }
    s["retuned"] = sr;
    s["rattled"] = sa;
    s["pulses_per_instance"] = {
        {"retune", static_cast<Scalar>(retune_pulses) / cfg.experiment.retuned_instances},
        {"rattle", static_cast<Scalar>(rattle_pulses) / cfg.experiment.rattled_instances}};
    s["solver_failures"] = failures.entries.size();
    res.artifacts.add_json("fig4/solver_failures.json", failures.entries);
    res.summary["fig4"] = s;
}

/// Arrays of one NL-RPUF instance: independent rattles of one programmed base array.
inline NlrpufArrays make_nlrpuf_arrays(const ExperimentConfig& cfg) {
    CrossbarArray base = fabricate(cfg, 0);
    program(cfg, base, make_targets(cfg, 0), 0);
    NlrpufArrays arr;
    auto snapshot = [&](std::string_view label, int i) {
        Rng rng = make_stream(cfg.experiment.seed, label, static_cast<std::uint64_t>(i));
        return rattle_array(base, cfg.targets.rattle_fraction, cfg.targets.rattle_width, rng).array;
    };
    for (int i = 0; i < cfg.puf.l; ++i) arr.segments.push_back(snapshot("segment", i));
    for (int d = 0; d < cfg.puf.dummy_segments; ++d) arr.dummies.push_back(snapshot("dummy", d));
    arr.output.push_back(snapshot("output", 0));
    return arr;
}

inline NlrpufConfig nlrpuf_config(const ExperimentConfig& cfg) {
    NlrpufConfig n;
    n.l = cfg.puf.l;
    n.segment = cfg.dims();
    n.output = cfg.dims();
    n.dummy_segments = cfg.puf.dummy_segments;
    n.k = cfg.puf.k;
    n.bias_encoding = cfg.puf.bias_encoding;
    n.v_lo = cfg.puf.v_lo;
    n.v_hi = cfg.puf.v_hi;
    n.read = read_options(cfg);
    return n;
}

/// Two-layer responses at fixed biases, multi-bias keys and quaternary keys.
inline void run_fig5(const ExperimentConfig& cfg, ExperimentResult& res, const Logger& log) {
    const NlrpufConfig ncfg = nlrpuf_config(cfg);
    const NlrpufArrays arr = make_nlrpuf_arrays(cfg);
    for (int i = 0; i < cfg.puf.l; ++i)
        detail::add_instance_maps(res.artifacts, "fig5/segment_" + std::to_string(i), arr.segments[i]);
    detail::add_instance_maps(res.artifacts, "fig5/output", arr.output.front());

    const std::size_t count = static_cast<std::size_t>(cfg.experiment.nlrpuf_keys) * kPacketBits;
    Rng rng = make_stream(cfg.experiment.seed, "nlrpuf-inputs", 0);
    const bool shared = cfg.puf.shared_challenge;
    const BigInt space = shared ? nlrpuf_shared_input_space(ncfg) : nlrpuf_input_space(ncfg);
    const std::vector<BigInt> ranks = sample_ranks(space, count, rng);
    std::vector<NlrpufInput> inputs;
    inputs.reserve(count);
    std::string ranks_text;
    for (const auto& r : ranks) {
        inputs.push_back(shared ? nlrpuf_shared_input_from_rank(ncfg, r) : nlrpuf_input_from_rank(ncfg, r));
        ranks_text += r.str() + "\n";
    }
    res.artifacts.add("fig5/input_ranks.txt", ranks_text);

    FailureLog failures;
    auto answer = [&](const NlrpufInput& in, const BigInt& rank, const Scalar* v_b) {
        const Scalar v = v_b ? *v_b : bias_from_code(in.bias_code, ncfg.k, ncfg.v_lo, ncfg.v_hi);
        try {
            return v_b ? nlrpuf_respond_at(ncfg, arr, in.segment_challenges, v) : nlrpuf_respond(ncfg, arr, in);
        } catch (const SolverError& e) {
            failures.record("fig5", rank, v, e);
            return false;
        }
    };

    std::vector<Scalar> biases = cfg.puf.biases;
    for (Scalar v : {kLinearBias, kNonlinearBias})
        if (std::find(biases.begin(), biases.end(), v) == biases.end()) biases.push_back(v);
    std::map<Scalar, std::vector<char>> bits;
    std::map<Scalar, std::vector<std::uint64_t>> by_bias;
    nlohmann::ordered_json s, uf, df;
    for (Scalar v : biases) {
        detail::log_line(log, "fig5: responses at " + mv_label(v));
        ResponseKey key;
        for (std::size_t i = 0; i < count; ++i) {
            const bool b = answer(inputs[i], ranks[i], &v);
            bits[v].push_back(b);
            key.push_bit(b);
        }
        if (std::find(cfg.puf.biases.begin(), cfg.puf.biases.end(), v) == cfg.puf.biases.end()) continue;
        by_bias[v] = key.packets();
        res.artifacts.add("fig5/keys_" + mv_label(v) + ".hex", hex_text(key.packets()));
        uf[mv_label(v)] = brief(uniformity(key.packets()));
        if (key.packets().size() >= 2) df[mv_label(v)] = brief(diffuseness(key.packets()));
    }
    s["uniformity"] = uf;
    s["diffuseness"] = df;
    const PairwiseMatrix ib = inter_bias_matrix(by_bias);
    res.artifacts.add("fig5/inter_bias.csv", matrix_text(ib));
    s["inter_bias"] = matrix_json(ib);

    if (ncfg.bias_encoding) {
        detail::log_line(log, "fig5: multi-bias responses");
        ResponseKey multi;
        for (std::size_t i = 0; i < count; ++i) multi.push_bit(answer(inputs[i], ranks[i], nullptr));
        res.artifacts.add("fig5/keys_multibias.hex", hex_text(multi.packets()));
        const MetricsReport mu = uniformity(multi.packets());
        res.artifacts.add_json("fig5/multibias_uniformity.json", to_json(mu));
        nlohmann::ordered_json m;
        m["uniformity"] = brief(mu);
        if (multi.packets().size() >= 2) {
            const MetricsReport md = diffuseness(multi.packets());
            res.artifacts.add_json("fig5/multibias_diffuseness.json", to_json(md));
            m["diffuseness"] = brief(md);
        }
        s["multibias"] = m;
    }

    ResponseKey quad(2);
    for (std::size_t i = 0; i < count; ++i)
        quad.push_symbol(quaternary_symbol(bits[kLinearBias][i], bits[kNonlinearBias][i]));
    const QuaternaryReport q = quaternary_metrics(quad.packets());
    res.artifacts.add("fig5/keys_quaternary.hex", hex_text(quad.packets()));
    res.artifacts.add_json("fig5/quaternary.json", to_json(q));
    s["quaternary"] = {{"symbol_frequency_pct", {q.frequency_pct(0), q.frequency_pct(1), q.frequency_pct(2), q.frequency_pct(3)}},
                       {"uniformity", brief(q.uf)}};
    if (q.df.n) s["quaternary"]["diffuseness"] = brief(q.df);
    s["input_space"] = nlrpuf_input_space(ncfg).str();
    s["sampled_space"] = space.str();
    s["solver_failures"] = failures.entries.size();
    res.artifacts.add_json("fig5/solver_failures.json", failures.entries);
    res.summary["fig5"] = s;
}

/// One programmed instance answered at every configured bias.
inline void run_custom(const ExperimentConfig& cfg, ExperimentResult& res, const Logger& log) {
    const ReadOptions opt = read_options(cfg);
    FailureLog failures;
    CrossbarArray array = fabricate(cfg, 0);
    const ProgramReport rep = program(cfg, array, make_targets(cfg, 0), 0);
    detail::add_instance_maps(res.artifacts, "custom/array", array);
    res.artifacts.add_json("custom/tuning.json", to_json(rep));
    const std::size_t count = static_cast<std::size_t>(cfg.puf.packets) * kPacketBits;
    const ChallengeSet cs = draw_challenges(cfg, count);
    res.artifacts.add("custom/challenges.txt", challenges_text(cs));
    std::map<Scalar, std::vector<std::uint64_t>> by_bias;
    nlohmann::ordered_json s, uf, df;
    for (Scalar v : cfg.puf.biases) {
        detail::log_line(log, "custom: responses at " + mv_label(v));
        const KeyRun run = respond_packets(array, cs, count, v, nullptr, opt, failures, "custom");
        res.artifacts.add("custom/keys_" + mv_label(v) + ".hex", hex_text(run.packets));
        uf[mv_label(v)] = brief(uniformity(run.packets));
        if (run.packets.size() >= 2) df[mv_label(v)] = brief(diffuseness(run.packets));
        by_bias[v] = run.packets;
    }
    const PairwiseMatrix ib = inter_bias_matrix(by_bias);
    res.artifacts.add("custom/inter_bias.csv", matrix_text(ib));
    s["uniformity"] = uf;
    s["diffuseness"] = df;
    s["inter_bias"] = matrix_json(ib);
    s["solver_failures"] = failures.entries.size();
    res.artifacts.add_json("custom/solver_failures.json", failures.entries);
    res.summary["custom"] = s;
}

/// Runs fig3, fig4, fig5, custom, or all of them; the config is validated first.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& name,
                                       const Logger& log = {}) {
    cfg.validate();
    ExperimentResult res{name, {}, nlohmann::ordered_json::object()};
    res.artifacts.add("config.ini", dump_config(cfg));
    const bool all = name == "all";
    if (!all && name != "fig3" && name != "fig4" && name != "fig5" && name != "custom")
        throw DomainError("unknown experiment '" + name + "' (expected fig3, fig4, fig5, custom or all)");
    if (all || name == "fig3") run_fig3(cfg, res, log);
    if (all || name == "fig4") run_fig4(cfg, res, log);
    if (all || name == "fig5") run_fig5(cfg, res, log);
    if (name == "custom") run_custom(cfg, res, log);
    res.artifacts.add_json("summary.json", res.summary);
    return res;
}

}  // namespace nlpuf
