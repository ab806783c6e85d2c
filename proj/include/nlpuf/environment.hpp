#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "nlpuf/common.hpp"
#include "nlpuf/crossbar.hpp"

namespace nlpuf {

// =============================================================================
// Read-out and environmental perturbations
// =============================================================================
//
// supply:   v_eff = v_b * (1 + U(-supply_frac, supply_frac))
// read:     I_meas = I * (1 + N(0, sigma_read * noise_gain))
// aging:    ln g_ref += N(0, drift_sigma_per_day * sqrt(days))
// thermal:  g_ref *= exp(e_act * (1/temp_ref - 1/T)) * exp(N(0, thermal_scatter * (T - temp_ref)))
//           noise_gain = 1 + temp_noise_gain * max(0, T - temp_ref)
//
// All forms are phenomenological; defaults are calibrated against the reliability protocol.

struct PerturbationModel {
    Scalar sigma_read = 0.03;
    Scalar supply_frac = 0.20;
    Scalar drift_sigma_per_day = 0.005;
    Scalar temp_ref = 300.0;          // K
    Scalar e_act = 300.0;             // K, Arrhenius scale of the conductance factor
    Scalar temp_noise_gain = 0.02;    // 1/K
    Scalar thermal_scatter = 5e-4;    // 1/K, per-device lognormal spread above temp_ref

    void validate() const {
        if (sigma_read < 0 || supply_frac < 0 || drift_sigma_per_day < 0 || e_act < 0 || temp_noise_gain < 0 ||
            thermal_scatter < 0)
            throw DomainError("perturbation: parameters must be non-negative");
        if (!(supply_frac < 1.0)) throw DomainError("perturbation: supply_frac must be < 1");
        if (!(temp_ref > 0.0)) throw DomainError("perturbation: temp_ref must be positive");
    }

    /// Every knob at zero: reads are exact and arrays never change.
    static PerturbationModel zero() { return {0.0, 0.0, 0.0, 300.0, 0.0, 0.0, 0.0}; }
};

struct ReadSample {
    Scalar v_b;
    Scalar current;
};

inline Scalar perturb_supply(const PerturbationModel& m, Scalar v_b, Rng& rng) {
    std::uniform_real_distribution<Scalar> u(-m.supply_frac, m.supply_frac);
    const Scalar d = u(rng);
    return v_b * (1.0 + d);
}

inline Scalar perturb_current(const PerturbationModel& m, Scalar current, Rng& rng, Scalar noise_gain = 1.0) {
    std::normal_distribution<Scalar> z(0.0, 1.0);
    const Scalar e = z(rng);
    return current * (1.0 + m.sigma_read * noise_gain * e);
}

/// One perturbed read: effective bias and noisy current.
inline ReadSample perturb_read(const PerturbationModel& m, Scalar v_b, Scalar current, Rng& rng,
                               Scalar noise_gain = 1.0) {
    const Scalar v = perturb_supply(m, v_b, rng);
    return {v, perturb_current(m, current, rng, noise_gain)};
}

/// Handle passed to response operations when reads are perturbed.
struct ReadEnvironment {
    PerturbationModel model;
    Rng* rng = nullptr;
    Scalar noise_gain = 1.0;
    bool vary_supply = true;

    [[nodiscard]] Scalar supply(Scalar v_b) const { return vary_supply ? perturb_supply(model, v_b, *rng) : v_b; }
    [[nodiscard]] Scalar current(Scalar i) const { return perturb_current(model, i, *rng, noise_gain); }
};

/// Returns an aged copy; the input array is untouched.
inline CrossbarArray age_array(const CrossbarArray& array, const PerturbationModel& m, Scalar days, Rng& rng) {
    require_finite(days, "days");
    if (days < 0.0) throw DomainError("age_array: days must be >= 0");
    CrossbarArray out = array;
    std::normal_distribution<Scalar> z(0.0, 1.0);
    const Scalar s = m.drift_sigma_per_day * std::sqrt(days);
    for (auto& d : out.devices()) {
        const Scalar e = z(rng);
        if (d.params.defect) continue;
        d.state.g_ref = std::clamp(d.state.g_ref * std::exp(s * e), d.params.g_min, d.params.g_max);
    }
    return out;
}

struct ThermalFactor {
    Scalar factor;
    Scalar noise_gain;
};

inline ThermalFactor thermal_factor(const PerturbationModel& m, Scalar temp) {
    require_finite(temp, "temperature");
    if (!(temp > 0.0)) throw DomainError("thermal_factor: temperature must be positive (K)");
    return {std::exp(m.e_act * (1.0 / m.temp_ref - 1.0 / temp)), 1.0 + m.temp_noise_gain * std::max(0.0, temp - m.temp_ref)};
}

/// Array snapshot at temperature `temp`: common Arrhenius factor with per-device scatter.
inline CrossbarArray heat_array(const CrossbarArray& array, const PerturbationModel& m, Scalar temp, Rng& rng) {
    const ThermalFactor tf = thermal_factor(m, temp);
    CrossbarArray out = array;
    const Scalar spread = m.thermal_scatter * std::max(0.0, temp - m.temp_ref);
    std::normal_distribution<Scalar> z(0.0, 1.0);
    for (auto& d : out.devices()) {
        const Scalar e = z(rng);
        d.state.g_ref = std::clamp(d.state.g_ref * tf.factor * std::exp(spread * e), d.params.g_min, d.params.g_max);
    }
    return out;
}

}  // namespace nlpuf
