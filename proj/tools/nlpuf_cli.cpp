// nlpuf: command-line front end for the crossbar PUF simulator.
//
// Array parameters are regenerated from (config, seed, index); device states travel as map
// files (<map>.csv plus the <map>.shift.csv sidecar).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nlpuf.hpp"

namespace fs = std::filesystem;
using namespace nlpuf;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
};

ExperimentConfig load(const Globals& g) {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (g.seed_set) cfg.experiment.seed = g.seed;
    if (!g.out.empty()) cfg.experiment.out = g.out;
    cfg.validate();
    return cfg;
}

std::string shift_path(const std::string& map) {
    fs::path p(map);
    return (p.parent_path() / (p.stem().string() + ".shift.csv")).string();
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open '" + path + "'");
    return is;
}

void write_file(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!(os << content)) throw Error("cannot write '" + path + "'");
}

void save_array(const CrossbarArray& a, const std::string& map) {
    write_file(map, map_text(a));
    write_file(shift_path(map), shift_map_text(a));
}

CrossbarArray load_array(const ExperimentConfig& cfg, std::uint64_t index, const std::string& map) {
    CrossbarArray a = fabricate(cfg, index);
    auto is = open_in(map);
    read_map(is, a);
    if (fs::exists(shift_path(map))) {
        auto ss = open_in(shift_path(map));
        read_shift_map(ss, a);
    }
    return a;
}

std::vector<std::uint64_t> load_hex(const std::string& path) {
    auto is = open_in(path);
    return read_hex(is);
}

std::string out_dir(const ExperimentConfig& cfg) { return cfg.experiment.out; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlinear memristive crossbar PUF simulator"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-c,--config", g.config, "Configuration file")->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>(
        "-s,--seed", [&](const std::uint64_t& s) { g.seed = s; g.seed_set = true; }, "Master seed (overrides config)");
    app.add_option("-o,--out", g.out, "Output directory (overrides config)");

    std::uint64_t index = 0;
    std::string map, challenges_file, keys_file, other_file;
    std::vector<std::string> trial_files;
    std::size_t count = 0;
    double bias = 0.2;
    bool quaternary = false;
    std::string name = "all";
    std::string input_rank;

    auto* cfg_cmd = app.add_subcommand("config", "Print the effective configuration");

    auto* fab = app.add_subcommand("fab", "Fabricate an instance and write its pristine map");
    fab->add_option("-i,--index", index, "Instance index");

    auto* tune = app.add_subcommand("tune", "Fabricate and program an instance to a generated target distribution");
    tune->add_option("-i,--index", index, "Instance index");

    auto* rattle = app.add_subcommand("rattle", "Reconfigure a programmed map with random RESET pulses");
    rattle->add_option("-m,--map", map, "Input map")->required()->check(CLI::ExistingFile);
    rattle->add_option("-i,--index", index, "Instance index the map belongs to");
    std::uint64_t rattle_index = 0;
    rattle->add_option("-r,--rattle", rattle_index, "Rattle stream index");

    auto* respond = app.add_subcommand("respond", "Answer challenges on a mapped instance");
    respond->add_option("-m,--map", map, "Device map")->required()->check(CLI::ExistingFile);
    respond->add_option("-i,--index", index, "Instance index the map belongs to");
    respond->add_option("--challenges", challenges_file, "Challenge file, one per line")->check(CLI::ExistingFile);
    respond->add_option("-n,--count", count, "Random challenges from the seed (multiple of 64)");
    respond->add_option("-b,--bias", bias, "Read bias in volts");
    respond->add_flag("-q,--quaternary", quaternary, "Quaternary symbols at 200 and 600 mV");

    auto* metrics = app.add_subcommand("metrics", "Metrics over hex key files");
    metrics->add_option("keys", keys_file, "Key file")->required()->check(CLI::ExistingFile);
    metrics->add_option("--against", other_file, "Second instance for uniqueness")->check(CLI::ExistingFile);
    metrics->add_option("--trials", trial_files, "Re-read key files for BER")->check(CLI::ExistingFile);
    metrics->add_flag("-q,--quaternary", quaternary, "Keys hold 2-bit symbols");

    auto* nl = app.add_subcommand("nlrpuf", "Build an NL-RPUF instance and answer inputs");
    nl->add_option("--rank", input_rank, "Input rank (decimal) of the broadcast or full input space");
    nl->add_option("-n,--count", count, "Random inputs from the seed");

    auto* exp = app.add_subcommand("experiment", "Run fig3, fig4, fig5, custom or all and write a report");
    exp->add_option("name", name, "Experiment")->check(CLI::IsMember({"fig3", "fig4", "fig5", "custom", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const ExperimentConfig cfg = load(g);

        if (*cfg_cmd) {
            dump_config(std::cout, cfg);
        } else if (*fab) {
            const CrossbarArray a = fabricate(cfg, index);
            const std::string path = out_dir(cfg) + "/instance_" + std::to_string(index) + ".csv";
            save_array(a, path);
            std::cout << path << '\n';
        } else if (*tune) {
            CrossbarArray a = fabricate(cfg, index);
            const ProgramReport rep = program(cfg, a, make_targets(cfg, index), index);
            const std::string stem = out_dir(cfg) + "/tuned_" + std::to_string(index);
            save_array(a, stem + ".csv");
            write_file(stem + ".tuning.json", to_json(rep).dump(2) + "\n");
            std::cout << stem << ".csv  pulses " << rep.total_pulses << "  failures " << rep.failures << '\n';
        } else if (*rattle) {
            const CrossbarArray a = load_array(cfg, index, map);
            Rng rng = make_stream(cfg.experiment.seed, "rattle", rattle_index);
            const RattleResult rr = rattle_array(a, cfg.targets.rattle_fraction, cfg.targets.rattle_width, rng);
            const std::string path = out_dir(cfg) + "/rattled_" + std::to_string(rattle_index) + ".csv";
            save_array(rr.array, path);
            std::cout << path << "  pulses " << rr.pulses << '\n';
        } else if (*respond) {
            const CrossbarArray a = load_array(cfg, index, map);
            const ChallengeDims d = cfg.dims();
            std::vector<Challenge> chs;
            if (!challenges_file.empty()) {
                auto is = open_in(challenges_file);
                std::string line;
                while (std::getline(is, line))
                    if (!line.empty()) chs.push_back(parse_challenge(line, d));
            } else {
                if (count == 0) throw DomainError("respond: give --challenges or --count");
                chs = draw_challenges(cfg, count).challenges;
            }
            const ReadOptions opt = read_options(cfg);
            ResponseKey key(quaternary ? 2 : 1);
            for (const auto& ch : chs) {
                if (quaternary) key.push_symbol(quaternary_respond(a, ch, nullptr, opt));
                else key.push_bit(respond_bit(a, ch, bias, nullptr, opt));
            }
            if (key.complete_packets()) {
                write_hex(std::cout, key.packets());
            } else {
                for (std::size_t i = 0; i < key.symbol_count(); ++i) std::cout << key.symbol(i);
                std::cout << '\n';
            }
        } else if (*metrics) {
            const auto keys = load_hex(keys_file);
            json j;
            if (quaternary) {
                j["quaternary"] = to_json(quaternary_metrics(keys));
            } else {
                j["uniformity"] = to_json(uniformity(keys), false);
                if (keys.size() >= 2) j["diffuseness"] = to_json(diffuseness(keys), false);
            }
            if (!other_file.empty()) j["uniqueness"] = to_json(uniqueness(keys, load_hex(other_file)), false);
            if (!trial_files.empty()) {
                std::vector<std::vector<std::uint64_t>> trials;
                for (const auto& f : trial_files) trials.push_back(load_hex(f));
                j["ber"] = to_json(ber(keys, trials), false);
            }
            std::cout << j.dump(2) << '\n';
        } else if (*nl) {
            const NlrpufConfig ncfg = nlrpuf_config(cfg);
            const NlrpufArrays arr = make_nlrpuf_arrays(cfg);
            const bool shared = cfg.puf.shared_challenge;
            const BigInt space = shared ? nlrpuf_shared_input_space(ncfg) : nlrpuf_input_space(ncfg);
            std::vector<BigInt> ranks;
            if (!input_rank.empty()) {
                ranks.emplace_back(input_rank);
            } else {
                if (count == 0) throw DomainError("nlrpuf: give --rank or --count");
                Rng rng = make_stream(cfg.experiment.seed, "nlrpuf-inputs", 0);
                ranks = sample_ranks(space, count, rng);
            }
            for (const auto& r : ranks) {
                const NlrpufInput in = shared ? nlrpuf_shared_input_from_rank(ncfg, r) : nlrpuf_input_from_rank(ncfg, r);
                const Scalar v = ncfg.bias_encoding ? bias_from_code(in.bias_code, ncfg.k, ncfg.v_lo, ncfg.v_hi) : ncfg.v_lo;
                const std::uint64_t hc = hidden_challenge(ncfg, arr, in.segment_challenges, v);
                const bool bit = nlrpuf_respond(ncfg, arr, in);
                std::printf("%s code=%u hc=%llu bit=%d\n", r.str().c_str(), in.bias_code,
                            static_cast<unsigned long long>(hc), bit ? 1 : 0);
            }
        } else if (*exp) {
            const ExperimentResult res =
                run_experiment(cfg, name, [](const std::string& s) { std::cerr << s << '\n'; });
            write_report(res.artifacts, out_dir(cfg));
            std::cout << res.summary.dump(2) << '\n';
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
