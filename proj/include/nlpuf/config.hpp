#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlpuf/challenge.hpp"
#include "nlpuf/common.hpp"
#include "nlpuf/crossbar.hpp"
#include "nlpuf/device.hpp"
#include "nlpuf/environment.hpp"
#include "nlpuf/tuning.hpp"

namespace nlpuf {

// =============================================================================
// Experiment configuration
// =============================================================================
//
// Sectioned key = value text. '#' and ';' start comments (at line start or after whitespace),
// blank lines are ignored. Every key has a default; unknown sections or keys, duplicates and
// malformed values are rejected with the offending line number.

struct ArrayConfig {
    int layers = 1;
    int rows = 10;
    int cols = 10;
    bool shared_middle = true;
    SolverOptions solver;
};

struct TargetConfig {
    Scalar mu_w = 20e-6;
    Scalar sigma_w = 6e-6;
    Scalar margin = 0.02;
    Scalar cross_balance = 0.0;
    Scalar rattle_fraction = 0.7;
    Scalar rattle_width = 10e-6;
};

struct PufConfig {
    int m = 5;
    int n = 2;
    bool transpose = false;
    UnselectedPolicy unselected = UnselectedPolicy::AllFloating;
    int packets = 500;                                // 64-bit keys per bias
    std::vector<Scalar> biases{0.2, 0.4, 0.6};        // V
    int l = 10;
    int dummy_segments = 2;
    bool shared_challenge = true;                     // one challenge drives every input segment
    int k = 3;
    bool bias_encoding = true;
    Scalar v_lo = 0.2;
    Scalar v_hi = 0.6;
};

struct ReliabilityConfig {
    std::vector<Scalar> aging_days{10.0, 20.0, 30.0};
    Scalar hot_temperature = 363.15;   // K
    int thermal_trials = 3;
    int ber_packets = 75;              // keys per bias in reliability runs (4800 bits)
};

struct ExperimentSettings {
    std::uint64_t seed = 1;
    std::string out = "out";
    int retuned_instances = 5;
    int rattled_instances = 10;
    int nlrpuf_keys = 500;
};

struct ExperimentConfig {
    ProcessVariation process;
    ArrayConfig array;
    TuningPolicy tuning;
    TargetConfig targets;
    PufConfig puf;
    PerturbationModel perturbation;
    ReliabilityConfig reliability;
    ExperimentSettings experiment;

    [[nodiscard]] ChallengeDims dims() const {
        return puf.transpose ? ChallengeDims{array.rows, array.cols, puf.m, puf.n}
                             : ChallengeDims{array.cols, array.rows, puf.m, puf.n};
    }

    void validate() const {
        process.validate();
        if (array.layers != 1 && array.layers != 2) throw DomainError("config: array.layers must be 1 or 2");
        if (array.rows < 1 || array.cols < 1) throw DomainError("config: array dimensions must be positive");
        if (!(array.solver.abs_tol > 0.0) || array.solver.max_iterations < 1)
            throw DomainError("config: invalid solver limits");
        if (!(array.solver.wire_resistance >= 0.0)) throw DomainError("config: wire_resistance must be >= 0");
        tuning.validate();
        if (!(targets.mu_w >= process.nominal.g_min && targets.mu_w <= process.nominal.g_max))
            throw DomainError("config: tuning.mu_w outside [g_min, g_max]");
        if (!(targets.sigma_w >= 0.0 && targets.margin > 0.0)) throw DomainError("config: invalid target spread");
        if (!(targets.rattle_fraction >= 0.0 && targets.rattle_width > 0.0)) throw DomainError("config: invalid rattle");
        dims().validate();
        if (puf.packets < 1) throw DomainError("config: puf.packets must be >= 1");
        if (puf.biases.empty()) throw DomainError("config: puf.biases must not be empty");
        if (puf.l < 1 || puf.l > 63 || puf.dummy_segments < 0 || puf.k < 1 || puf.k > 31)
            throw DomainError("config: invalid NL-RPUF shape");
        if (!(puf.v_lo < puf.v_hi)) throw DomainError("config: puf.v_lo must be below puf.v_hi");
        perturbation.validate();
        for (Scalar d : reliability.aging_days)
            if (!(d >= 0.0)) throw DomainError("config: aging days must be >= 0");
        if (!(reliability.hot_temperature > 0.0)) throw DomainError("config: hot_temperature must be positive");
        if (reliability.thermal_trials < 1 || reliability.ber_packets < 1)
            throw DomainError("config: reliability counts must be >= 1");
        if (experiment.retuned_instances < 2 || experiment.rattled_instances < 2)
            throw DomainError("config: need at least two instances for uniqueness");
        if (experiment.nlrpuf_keys < 1) throw DomainError("config: nlrpuf_keys must be >= 1");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Drops a '#' or ';' comment that starts the line or follows whitespace.
inline std::string strip_comment(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i)
        if ((s[i] == '#' || s[i] == ';') && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) return s.substr(0, i);
    return s;
}

inline std::string format_double(Scalar v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline Scalar parse_double(const std::string& s, int line) {
    Scalar v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError("expected a finite number, got '" + s + "'", line);
    return v;
}

template <typename Int>
Int parse_int(const std::string& s, int line) {
    Int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("expected an integer, got '" + s + "'", line);
    return v;
}

inline bool parse_bool(const std::string& s, int line) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ParseError("expected true or false, got '" + s + "'", line);
}

inline std::vector<Scalar> parse_list(const std::string& s, int line) {
    std::vector<Scalar> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_double(trim(tok), line));
    if (out.empty()) throw ParseError("expected a comma-separated list", line);
    return out;
}

inline std::string format_list(const std::vector<Scalar>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

struct Field {
    std::string section;
    std::string key;
    std::function<void(const std::string&, int)> set;
    std::function<std::string()> get;
};

inline Field real(std::string sec, std::string key, Scalar& ref) {
    return {std::move(sec), std::move(key), [&ref](const std::string& s, int l) { ref = parse_double(s, l); },
            [&ref] { return format_double(ref); }};
}

template <typename Int>
Field integer(std::string sec, std::string key, Int& ref) {
    return {std::move(sec), std::move(key), [&ref](const std::string& s, int l) { ref = parse_int<Int>(s, l); },
            [&ref] { return std::to_string(ref); }};
}

inline Field boolean(std::string sec, std::string key, bool& ref) {
    return {std::move(sec), std::move(key), [&ref](const std::string& s, int l) { ref = parse_bool(s, l); },
            [&ref] { return std::string(ref ? "true" : "false"); }};
}

inline Field list(std::string sec, std::string key, std::vector<Scalar>& ref) {
    return {std::move(sec), std::move(key), [&ref](const std::string& s, int l) { ref = parse_list(s, l); },
            [&ref] { return format_list(ref); }};
}

inline std::vector<Field> schema(ExperimentConfig& c) {
    auto& d = c.process.nominal;
    auto& pv = c.process;
    auto& pm = c.perturbation;
    std::vector<Field> f = {
        real("device", "b_nl", d.b_nl),
        real("device", "kappa", d.kappa),
        real("device", "g_min", d.g_min),
        real("device", "g_max", d.g_max),
        real("device", "v_set", d.v_set),
        real("device", "v_reset", d.v_reset),
        real("device", "eta_set", d.eta_set),
        real("device", "eta_reset", d.eta_reset),
        real("device", "v_slope", d.v_slope),
        real("device", "sigma_switch", d.sigma_switch),
        real("device", "sigma_nl_switch", d.sigma_nl_switch),
        real("device", "nl_mixing", d.nl_mixing),
        real("device", "v_ref", d.v_ref),
        real("device", "v_window", d.v_window),
        real("device", "sigma_ln_b", pv.sigma_ln_b),
        real("device", "sigma_ln_kappa", pv.sigma_ln_kappa),
        real("device", "sigma_ln_vth", pv.sigma_ln_vth),
        real("device", "g_init", pv.g_init),
        real("device", "sigma_ln_g_init", pv.sigma_ln_g_init),
        real("device", "yield", pv.yield),
        real("device", "stuck_g", pv.stuck_g),

        integer("array", "layers", c.array.layers),
        integer("array", "rows", c.array.rows),
        integer("array", "cols", c.array.cols),
        boolean("array", "shared_middle", c.array.shared_middle),
        real("array", "solver_abs_tol", c.array.solver.abs_tol),
        integer("array", "solver_max_iterations", c.array.solver.max_iterations),
        real("array", "wire_resistance", c.array.solver.wire_resistance),

        real("tuning", "tolerance", c.tuning.tolerance),
        integer("tuning", "max_pulses", c.tuning.max_pulses),
        real("tuning", "start_amplitude", c.tuning.start_amplitude),
        real("tuning", "amplitude_step", c.tuning.amplitude_step),
        real("tuning", "max_amplitude", c.tuning.max_amplitude),
        real("tuning", "width", c.tuning.width),
        real("tuning", "mu_w", c.targets.mu_w),
        real("tuning", "sigma_w", c.targets.sigma_w),
        real("tuning", "margin", c.targets.margin),
        real("tuning", "cross_balance", c.targets.cross_balance),
        real("tuning", "rattle_fraction", c.targets.rattle_fraction),
        real("tuning", "rattle_width", c.targets.rattle_width),

        integer("puf", "m", c.puf.m),
        integer("puf", "n", c.puf.n),
        boolean("puf", "transpose", c.puf.transpose),
        {"puf", "unselected",
         [&c](const std::string& s, int l) {
             if (s == "floating") c.puf.unselected = UnselectedPolicy::AllFloating;
             else if (s == "configurable") c.puf.unselected = UnselectedPolicy::Configurable;
             else throw ParseError("expected floating or configurable, got '" + s + "'", l);
         },
         [&c] { return std::string(c.puf.unselected == UnselectedPolicy::AllFloating ? "floating" : "configurable"); }},
        integer("puf", "packets", c.puf.packets),
        list("puf", "biases", c.puf.biases),
        integer("puf", "l", c.puf.l),
        integer("puf", "dummy_segments", c.puf.dummy_segments),
        boolean("puf", "shared_challenge", c.puf.shared_challenge),
        integer("puf", "k", c.puf.k),
        boolean("puf", "bias_encoding", c.puf.bias_encoding),
        real("puf", "v_lo", c.puf.v_lo),
        real("puf", "v_hi", c.puf.v_hi),

        real("perturbation", "sigma_read", pm.sigma_read),
        real("perturbation", "supply_frac", pm.supply_frac),
        real("perturbation", "drift_sigma_per_day", pm.drift_sigma_per_day),
        real("perturbation", "temp_ref", pm.temp_ref),
        real("perturbation", "e_act", pm.e_act),
        real("perturbation", "temp_noise_gain", pm.temp_noise_gain),
        real("perturbation", "thermal_scatter", pm.thermal_scatter),
        list("perturbation", "aging_days", c.reliability.aging_days),
        real("perturbation", "hot_temperature", c.reliability.hot_temperature),
        integer("perturbation", "thermal_trials", c.reliability.thermal_trials),
        integer("perturbation", "ber_packets", c.reliability.ber_packets),

        integer("experiment", "seed", c.experiment.seed),
        {"experiment", "out", [&c](const std::string& s, int) { c.experiment.out = s; },
         [&c] { return c.experiment.out; }},
        integer("experiment", "retuned_instances", c.experiment.retuned_instances),
        integer("experiment", "rattled_instances", c.experiment.rattled_instances),
        integer("experiment", "nlrpuf_keys", c.experiment.nlrpuf_keys),
    };
    return f;
}

}  // namespace detail

/// Parses over the defaults in `base`; validation failures are reported without a line.
inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {}) {
    ExperimentConfig c = std::move(base);
    const auto fields = detail::schema(c);
    std::map<std::string, std::map<std::string, const detail::Field*>> index;
    for (const auto& f : fields) index[f.section][f.key] = &f;

    std::map<std::string, std::map<std::string, int>> seen;
    std::string section, raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = detail::trim(detail::strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError("unterminated section header", line);
            section = detail::trim(s.substr(1, s.size() - 2));
            if (!index.count(section)) throw ParseError("unknown section [" + section + "]", line);
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line);
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (section.empty()) throw ParseError("key '" + key + "' outside any section", line);
        const auto it = index[section].find(key);
        if (it == index[section].end()) throw ParseError("unknown key '" + key + "' in [" + section + "]", line);
        if (const auto prev = seen[section].find(key); prev != seen[section].end())
            throw ParseError("duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) + ")",
                             line);
        seen[section][key] = line;
        it->second->set(value, line);
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config file '" + path + "'");
    try {
        return parse_config(is);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

/// Every key with its current value; parse_config(dump_config(c)) reproduces c.
inline void dump_config(std::ostream& os, const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    const auto fields = detail::schema(c);
    std::string section;
    for (const auto& f : fields) {
        if (f.section != section) {
            os << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
            section = f.section;
        }
        os << f.key << " = " << f.get() << '\n';
    }
}

inline std::string dump_config(const ExperimentConfig& c) {
    std::ostringstream os;
    dump_config(os, c);
    return os.str();
}

}  // namespace nlpuf
