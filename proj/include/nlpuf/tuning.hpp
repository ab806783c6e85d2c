#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "nlpuf/common.hpp"
#include "nlpuf/crossbar.hpp"
#include "nlpuf/device.hpp"

namespace nlpuf {

// =============================================================================
// Write-verify tuning
// =============================================================================

struct TuningPolicy {
    Scalar tolerance = 0.01;        // relative
    int max_pulses = 5000;          // per device
    Scalar start_amplitude = 0.3;   // V
    Scalar amplitude_step = 0.05;   // V
    Scalar max_amplitude = 1.56;    // V, 1.3 x nominal RESET threshold
    Scalar width = 10e-6;           // s

    void validate() const {
        if (!(tolerance > 0.0)) throw DomainError("tuning: tolerance must be positive");
        if (max_pulses < 1) throw DomainError("tuning: max_pulses must be >= 1");
        if (!(start_amplitude > 0.0 && amplitude_step > 0.0 && start_amplitude <= max_amplitude))
            throw DomainError("tuning: invalid pulse ladder");
        if (!(width > 0.0)) throw DomainError("tuning: width must be positive");
    }
};

class UntunableDevice : public Error {
public:
    UntunableDevice(const std::string& what, int pulses) : Error(what), pulses_(pulses) {}
    [[nodiscard]] int pulses() const { return pulses_; }

private:
    int pulses_;
};

/// Pulse-and-verify loop. SET below target, RESET above. The amplitude for a polarity
/// climbs one step when a pulse covers less than a quarter of the remaining log-distance and
/// drops one step after an overshoot.
inline int tune_device(CrossbarArray& array, int layer, int row, int col, Scalar target, const TuningPolicy& policy,
                       Rng& rng) {
    policy.validate();
    Device& d = array.at(layer, row, col);
    require_finite(target, "target conductance");
    if (!(target >= d.params.g_min && target <= d.params.g_max))
        throw DomainError("tune_device: target outside device dynamic range");
    if (d.params.defect) throw UntunableDevice("tune_device: defective device", 0);

    Scalar amp[2] = {policy.start_amplitude, policy.start_amplitude};  // [0] SET, [1] RESET
    int pulses = 0;
    for (;;) {
        const Scalar g = device_conductance(d.state, d.params, d.params.v_ref);
        const Scalar err = g / target - 1.0;
        if (std::abs(err) <= policy.tolerance) return pulses;
        if (pulses >= policy.max_pulses) throw UntunableDevice("tune_device: pulse budget exhausted", pulses);

        const int pol = err < 0.0 ? 0 : 1;
        d.state = apply_pulse(d.state, d.params, pol == 0 ? amp[0] : -amp[1], policy.width, rng);
        ++pulses;

        const Scalar after = d.state.g_ref / target - 1.0;
        const bool overshoot = (after > 0.0) != (err > 0.0) && std::abs(after) > policy.tolerance;
        const Scalar moved = std::abs(std::log(d.state.g_ref / g));
        const Scalar remaining = std::abs(std::log(d.state.g_ref / target));
        if (overshoot) amp[pol] = std::max(policy.start_amplitude, amp[pol] - policy.amplitude_step);
        else if (moved < 0.25 * remaining) amp[pol] = std::min(policy.max_amplitude, amp[pol] + policy.amplitude_step);
    }
}

// =============================================================================
// Target distribution generation
// =============================================================================

struct TargetDistribution {
    Scalar mu_w = 0.0;
    Scalar sigma_w = 0.0;
    Scalar margin = 0.02;
    int layers = 1;
    int rows = 0;
    int cols = 0;
    std::vector<Scalar> targets;   // (layer, row, col) order
    bool range_warning = false;    // mu_w +/- 3 sigma_w leaves [g_min, g_max]
    int attempts = 0;

    [[nodiscard]] Scalar at(int layer, int r, int c) const {
        return targets[(static_cast<std::size_t>(layer) * rows + r) * cols + c];
    }
};

struct SelectionScheme {
    int m = 5;
    int n = 2;
    bool transpose = false;   // primary lines are rows instead of columns
    Scalar cross_balance = 0.0;   // fraction of cross-line sum deviations removed, in [0, 1]
};

struct TargetBounds {
    Scalar g_min = 1e-6;
    Scalar g_max = 200e-6;
};

namespace detail {

/// Shifts `x` so that it sums to `total`, spreading the correction equally over entries not
/// pinned at a bound (minimum-norm solution of the sum constraint), until nothing clips.
inline bool balance_line(std::vector<Scalar>& x, Scalar total, Scalar lo, Scalar hi) {
    std::vector<char> pinned(x.size(), 0);
    for (int pass = 0; pass <= static_cast<int>(x.size()); ++pass) {
        const Scalar sum = std::accumulate(x.begin(), x.end(), 0.0);
        const auto free = std::count(pinned.begin(), pinned.end(), 0);
        if (free == 0) return false;
        const Scalar shift = (total - sum) / static_cast<Scalar>(free);
        bool clipped = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (pinned[i]) continue;
            x[i] += shift;
            if (x[i] < lo || x[i] > hi) {
                x[i] = std::clamp(x[i], lo, hi);
                pinned[i] = 1;
                clipped = true;
            }
        }
        if (!clipped) return true;
    }
    return false;
}

}  // namespace detail

/// Random target map with balanced line sums.
///
/// Candidate line sums are mu_w * k * (1 + d) with small random differentials d. Device weights
/// are drawn around mu_w and shifted onto their line sums (minimum-norm shift per line, clipped to
/// range). With cross_balance = a > 0 the cross-line sums s are pulled to s - a * (s - mean(s)),
/// alternating the two projections until every sum is met. A candidate is accepted when the
/// map's mean and standard deviation sit within the relative margin of (mu_w, sigma_w) and line
/// sums stay within 1 + margin of each other.
inline TargetDistribution generate_target_distribution(int rows, int cols, Scalar mu_w, Scalar sigma_w,
                                                       const SelectionScheme& scheme, Scalar margin, Rng& rng,
                                                       TargetBounds bounds = {}, int layers = 1,
                                                       int max_attempts = 10000) {
    if (rows < 1 || cols < 1 || layers < 1) throw DomainError("targets: dimensions must be positive");
    if (!(margin > 0.0)) throw DomainError("targets: margin must be positive");
    if (!(sigma_w >= 0.0)) throw DomainError("targets: sigma_w must be >= 0");
    if (!(mu_w >= bounds.g_min && mu_w <= bounds.g_max)) throw DomainError("targets: mu_w outside dynamic range");
    if (!(scheme.cross_balance >= 0.0 && scheme.cross_balance <= 1.0))
        throw DomainError("targets: cross_balance must be in [0, 1]");

    TargetDistribution td{mu_w, sigma_w, margin, layers, rows, cols, {}, false, 0};
    td.range_warning = mu_w - 3 * sigma_w < bounds.g_min || mu_w + 3 * sigma_w > bounds.g_max;
    const std::size_t per_layer = static_cast<std::size_t>(rows) * cols;
    td.targets.assign(per_layer * layers, mu_w);
    if (sigma_w == 0.0) return td;

    // primary lines are columns unless transposed; k devices per primary line
    const int lines = scheme.transpose ? rows : cols;
    const int k = scheme.transpose ? cols : rows;
    auto index = [&](int line, int j) {
        return scheme.transpose ? static_cast<std::size_t>(line) * cols + j : static_cast<std::size_t>(j) * cols + line;
    };
    // balancing removes the line-mean components of the variance
    const Scalar a = scheme.cross_balance;
    const bool cross = a > 0.0 && k > 1;
    Scalar keep = k > 1 ? static_cast<Scalar>(k - 1) / k : 1.0;
    if (cross) keep *= 1.0 - (1.0 - (1.0 - a) * (1.0 - a)) / lines;
    const Scalar draw_sigma = sigma_w / std::sqrt(keep);
    std::normal_distribution<Scalar> z(0.0, 1.0);

    auto draw_sums = [&](int count, int len) {
        std::vector<Scalar> sums(count);
        for (auto& v : sums) v = mu_w * len * (1.0 + 0.25 * margin * z(rng));
        return sums;
    };
    auto spread_ok = [&](const std::vector<Scalar>& sums) {
        const auto [lo_it, hi_it] = std::minmax_element(sums.begin(), sums.end());
        return *hi_it <= *lo_it * (1.0 + margin);
    };
    auto project = [&](std::vector<Scalar>& w, const std::vector<Scalar>& sums, bool primary) {
        const int count = primary ? lines : k;
        const int len = primary ? k : lines;
        std::vector<Scalar> x(len);
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < len; ++j) x[j] = w[primary ? index(i, j) : index(j, i)];
            if (!detail::balance_line(x, sums[i], bounds.g_min, bounds.g_max)) return false;
            for (int j = 0; j < len; ++j) w[primary ? index(i, j) : index(j, i)] = x[j];
        }
        return true;
    };
    auto residual = [&](const std::vector<Scalar>& w, const std::vector<Scalar>& sums) {
        Scalar worst = 0.0;
        for (int j = 0; j < k; ++j) {
            Scalar s = 0.0;
            for (int i = 0; i < lines; ++i) s += w[index(i, j)];
            worst = std::max(worst, std::abs(s / sums[j] - 1.0));
        }
        return worst;
    };

    for (int layer = 0; layer < layers; ++layer) {
        std::vector<Scalar> best;
        bool accepted = false;
        for (int attempt = 0; attempt < max_attempts && !accepted; ++attempt) {
            ++td.attempts;
            const std::vector<Scalar> sums = draw_sums(lines, k);
            if (!spread_ok(sums)) continue;
            std::vector<Scalar> w(per_layer);
            for (auto& v : w) v = mu_w + draw_sigma * z(rng);
            bool feasible = project(w, sums, true);
            if (feasible && cross) {
                std::vector<Scalar> cs(k, 0.0);
                for (int j = 0; j < k; ++j)
                    for (int i = 0; i < lines; ++i) cs[j] += w[index(i, j)];
                const Scalar mean_cs = std::accumulate(cs.begin(), cs.end(), 0.0) / k;
                for (auto& v : cs) v -= a * (v - mean_cs);
                for (int it = 0; it < 200 && feasible && residual(w, cs) > 1e-12; ++it)
                    feasible = project(w, cs, false) && project(w, sums, true);
                feasible = feasible && residual(w, cs) <= 1e-9;
            }
            if (!feasible) continue;

            const Scalar mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<Scalar>(w.size());
            Scalar var = 0.0;
            for (Scalar v : w) var += (v - mean) * (v - mean);
            const Scalar sd = std::sqrt(var / static_cast<Scalar>(w.size() - 1));
            if (std::abs(mean - mu_w) <= margin * mu_w && std::abs(sd - sigma_w) <= margin * sigma_w) {
                best = std::move(w);
                accepted = true;
            }
        }
        if (!accepted) throw DomainError("targets: no candidate met the confidence margin (infeasible distribution)");
        std::copy(best.begin(), best.end(), td.targets.begin() + static_cast<std::ptrdiff_t>(layer * per_layer));
    }
    return td;
}

// =============================================================================
// Array programming and rattling
// =============================================================================

enum class TuneStatus { Ok, Defective, Untunable };

struct DeviceTuning {
    int layer, row, col;
    Scalar target;
    Scalar final_g;
    int pulses;
    TuneStatus status;

    [[nodiscard]] Scalar rel_error() const { return final_g / target - 1.0; }
};

struct ProgramReport {
    std::vector<DeviceTuning> devices;
    long total_pulses = 0;
    int failures = 0;
};

/// Tunes every crosspoint in (layer, row, col) order. Failed devices are reported, not fatal.
inline ProgramReport program_array(CrossbarArray& array, const TargetDistribution& targets, const TuningPolicy& policy,
                                   Rng& rng) {
    if (targets.layers != array.layers() || targets.rows != array.rows() || targets.cols != array.cols())
        throw DomainError("program_array: target map does not match array dimensions");
    ProgramReport rep;
    for (int layer = 0; layer < array.layers(); ++layer)
        for (int r = 0; r < array.rows(); ++r)
            for (int c = 0; c < array.cols(); ++c) {
                const Scalar t = targets.at(layer, r, c);
                DeviceTuning dt{layer, r, c, t, 0.0, 0, TuneStatus::Ok};
                try {
                    dt.pulses = tune_device(array, layer, r, c, t, policy, rng);
                } catch (const UntunableDevice& e) {
                    dt.pulses = e.pulses();
                    dt.status = array.at(layer, r, c).params.defect ? TuneStatus::Defective : TuneStatus::Untunable;
                    ++rep.failures;
                }
                dt.final_g = array.at(layer, r, c).state.g_ref;
                rep.total_pulses += dt.pulses;
                rep.devices.push_back(dt);
            }
    return rep;
}

struct RattleResult {
    CrossbarArray array;
    long pulses = 0;
};

/// One RESET pulse per working device with amplitude ~ U(0, max_fraction * mean v_reset).
inline RattleResult rattle_array(const CrossbarArray& array, Scalar max_fraction, Scalar width, Rng& rng) {
    require_finite(max_fraction, "max_fraction");
    if (max_fraction < 0.0) throw DomainError("rattle_array: max_fraction must be >= 0");
    Scalar sum = 0.0;
    int working = 0;
    for (const auto& d : array.devices())
        if (!d.params.defect) {
            sum += d.params.v_reset;
            ++working;
        }
    RattleResult out{array, 0};
    if (working == 0) return out;
    const Scalar v_max = max_fraction * sum / working;
    std::uniform_real_distribution<Scalar> u(0.0, 1.0);
    for (auto& d : out.array.devices()) {
        const Scalar amp = v_max * u(rng);
        if (d.params.defect) continue;
        d.state = apply_pulse(d.state, d.params, -amp, width, rng);
        ++out.pulses;
    }
    return out;
}

}  // namespace nlpuf
