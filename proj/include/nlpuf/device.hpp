#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "nlpuf/common.hpp"

namespace nlpuf {

// =============================================================================
// Analog memristive crosspoint
// =============================================================================
//
// Static I-V:   I(V) = A * sinh(B_eff * V)
//               B_eff = b_nl * (1 + kappa * ln(g_mid / g_ref)),  g_mid = sqrt(g_min * g_max)
//               A is fixed by I(V_ref) = g_ref * V_ref.
// Lower programmed conductance gives a larger B_eff (stronger nonlinearity) when kappa > 0.
//
// Switching:    d ln(g_ref) = +/- eta * width * exp((|amplitude| - v_th) / v_slope) * (1 + xi)
//               xi ~ N(0, sigma_switch), result clamped to [g_min, g_max].
//               Each pulse also rearranges the filament: with rho = exp(-nl_mixing * |amplitude| / v_th),
//               b_shift <- rho * b_shift + sqrt(1 - rho^2) * sigma_nl_switch * zeta, zeta ~ N(0, 1),
//               and B_eff is scaled by exp(b_shift).

struct DeviceParams {
    Scalar b_nl = 2.0;             // nonlinearity coefficient (1/V)
    Scalar kappa = 0.3;            // state/nonlinearity coupling
    Scalar g_min = 1e-6;           // S
    Scalar g_max = 200e-6;         // S
    Scalar v_set = 1.0;            // V
    Scalar v_reset = 1.2;          // V, applied with negative polarity
    Scalar eta_set = 6.0e6;        // 1/s
    Scalar eta_reset = 6.0e6;      // 1/s
    Scalar v_slope = 0.1;          // V, sub-threshold softness
    Scalar sigma_switch = 0.3;     // cycle-to-cycle switching noise
    Scalar sigma_nl_switch = 1.0;  // stationary spread of ln b_nl across filament configurations
    Scalar nl_mixing = 5.0;        // configuration renewal rate per unit |amplitude| / v_th
    Scalar v_ref = 0.2;            // V, calibration read bias
    Scalar v_window = 1.0;         // V, allowed |v| for static reads
    bool defect = false;           // stuck device: pulses have no effect

    [[nodiscard]] Scalar g_mid() const { return std::sqrt(g_min * g_max); }

    void validate() const {
        if (!(g_min > 0.0 && g_min < g_max)) throw DomainError("device: require 0 < g_min < g_max");
        if (!(b_nl > 0.0)) throw DomainError("device: b_nl must be positive");
        if (!(v_slope > 0.0)) throw DomainError("device: v_slope must be positive");
        if (!(eta_set >= 0.0 && eta_reset >= 0.0)) throw DomainError("device: switching rates must be >= 0");
        if (!(v_set > 0.0 && v_reset > 0.0)) throw DomainError("device: thresholds must be positive");
        if (!(sigma_switch >= 0.0 && sigma_nl_switch >= 0.0 && nl_mixing >= 0.0)) throw DomainError("device: switching noise must be >= 0");
        if (!(v_ref > 0.0 && v_ref <= v_window)) throw DomainError("device: require 0 < v_ref <= v_window");
    }
};

struct DeviceState {
    Scalar g_ref = 10e-6;    // conductance at v_ref (S)
    Scalar b_shift = 0.0;    // log-multiplier on b_nl left by past switching events
};

/// Smallest admissible B_eff, as a fraction of b_nl. Keeps I(V) strictly increasing when
/// kappa * ln(g_mid / g_ref) < -1.
inline constexpr Scalar kMinExponentFraction = 1e-3;

inline Scalar effective_exponent(const DeviceState& s, const DeviceParams& p) {
    const Scalar b_nl = p.b_nl * std::exp(s.b_shift);
    const Scalar b = b_nl * (1.0 + p.kappa * std::log(p.g_mid() / s.g_ref));
    return std::max(b, b_nl * kMinExponentFraction);
}

/// Precomputed I = amplitude * sinh(exponent * v) for one device; used by the network solver.
struct IvCurve {
    Scalar amplitude = 0.0;
    Scalar exponent = 0.0;

    [[nodiscard]] Scalar current(Scalar v) const { return amplitude * std::sinh(exponent * v); }

    [[nodiscard]] Scalar slope(Scalar v) const { return amplitude * exponent * std::cosh(exponent * v); }

    /// current and dI/dV from a single expm1() call; exact in the small-exponent limit
    void eval(Scalar v, Scalar& i, Scalar& di) const {
        const Scalar m = std::expm1(exponent * v);
        const Scalar e = 1.0 + m;
        const Scalar inv = 1.0 / e;
        i = amplitude * 0.5 * m * (1.0 + inv);
        di = amplitude * exponent * 0.5 * (e + inv);
    }
};

inline IvCurve make_iv(const DeviceState& s, const DeviceParams& p) {
    const Scalar b = effective_exponent(s, p);
    return IvCurve{s.g_ref * p.v_ref / std::sinh(b * p.v_ref), b};
}

inline Scalar device_current(const DeviceState& s, const DeviceParams& p, Scalar v) {
    require_finite(v, "device voltage");
    if (std::abs(v) > p.v_window) throw DomainError("device voltage outside operating window");
    // calibration points are returned exactly
    if (v == p.v_ref) return s.g_ref * p.v_ref;
    if (v == -p.v_ref) return -(s.g_ref * p.v_ref);
    return make_iv(s, p).current(v);
}

inline Scalar device_conductance(const DeviceState& s, const DeviceParams& p, Scalar v) {
    if (v == 0.0) throw DomainError("conductance undefined at v = 0");
    if (v == p.v_ref) return s.g_ref;
    return device_current(s, p, v) / v;
}

/// Nonlinearity in percent: |1 - (v / v0) * I(v0) / I(v)| * 100.
inline Scalar nonlinearity(const DeviceState& s, const DeviceParams& p, Scalar v, Scalar v0) {
    if (v == 0.0 || v0 == 0.0) throw DomainError("nonlinearity: bias points must be nonzero");
    const Scalar iv = device_current(s, p, v);
    const Scalar iv0 = device_current(s, p, v0);
    if (iv == 0.0) throw DomainError("nonlinearity: zero current at v");
    return std::abs(1.0 - (v / v0) * (iv0 / iv)) * 100.0;
}

/// Applies one voltage pulse. Positive amplitude is SET, negative is RESET.
inline DeviceState apply_pulse(const DeviceState& s, const DeviceParams& p, Scalar amplitude, Scalar width,
                               Rng& rng) {
    require_finite(amplitude, "pulse amplitude");
    require_finite(width, "pulse width");
    if (!(width > 0.0)) throw DomainError("pulse width must be positive");
    if (amplitude == 0.0 || p.defect) return s;

    const bool set = amplitude > 0.0;
    const Scalar v_th = set ? p.v_set : p.v_reset;
    const Scalar eta = set ? p.eta_set : p.eta_reset;
    std::normal_distribution<Scalar> noise(0.0, 1.0);
    const Scalar xi = p.sigma_switch * noise(rng);
    const Scalar zeta = noise(rng);
    const Scalar rate = eta * width * std::exp((std::abs(amplitude) - v_th) / p.v_slope) * std::max(0.0, 1.0 + xi);

    const Scalar ln_g = std::log(s.g_ref) + (set ? rate : -rate);
    DeviceState out{std::clamp(std::exp(ln_g), p.g_min, p.g_max), s.b_shift};
    const Scalar rho = std::exp(-p.nl_mixing * std::abs(amplitude) / v_th);
    out.b_shift = rho * s.b_shift + std::sqrt(1.0 - rho * rho) * p.sigma_nl_switch * zeta;
    // exp(log(g)) may round across the original value when rate underflows
    if (set) out.g_ref = std::max(out.g_ref, s.g_ref);
    else out.g_ref = std::min(out.g_ref, s.g_ref);
    return out;
}

// =============================================================================
// Process variation
// =============================================================================

struct ProcessVariation {
    DeviceParams nominal;
    Scalar sigma_ln_b = 0.1;       // lognormal spread of b_nl
    Scalar sigma_ln_kappa = 0.0;   // lognormal spread of kappa
    Scalar sigma_ln_vth = 0.05;    // lognormal spread of v_set and v_reset
    Scalar g_init = 5e-6;          // median pristine conductance (S)
    Scalar sigma_ln_g_init = 0.0;
    Scalar yield = 1.0;            // probability a device is defect-free
    Scalar stuck_g = 1e-6;         // conductance of defective devices (S)

    void validate() const {
        nominal.validate();
        if (sigma_ln_b < 0 || sigma_ln_kappa < 0 || sigma_ln_vth < 0 || sigma_ln_g_init < 0)
            throw DomainError("process: sigmas must be >= 0");
        if (!(yield >= 0.0 && yield <= 1.0)) throw DomainError("process: yield must be in [0, 1]");
        if (!(g_init >= nominal.g_min && g_init <= nominal.g_max))
            throw DomainError("process: g_init outside [g_min, g_max]");
        if (!(stuck_g >= nominal.g_min && stuck_g <= nominal.g_max))
            throw DomainError("process: stuck_g outside [g_min, g_max]");
    }
};

/// Draws one device. Always consumes the same number of variates so that streams stay
/// aligned when only the sigmas change.
inline std::pair<DeviceParams, DeviceState> sample_device(const ProcessVariation& pv, Rng& rng) {
    pv.validate();
    std::normal_distribution<Scalar> z(0.0, 1.0);
    std::uniform_real_distribution<Scalar> u(0.0, 1.0);
    const Scalar zb = z(rng), zk = z(rng), zs = z(rng), zr = z(rng), zg = z(rng);
    const Scalar ud = u(rng);

    DeviceParams p = pv.nominal;
    p.b_nl *= std::exp(pv.sigma_ln_b * zb);
    p.kappa *= std::exp(pv.sigma_ln_kappa * zk);
    p.v_set *= std::exp(pv.sigma_ln_vth * zs);
    p.v_reset *= std::exp(pv.sigma_ln_vth * zr);
    p.defect = ud >= pv.yield;

    DeviceState s;
    if (p.defect) {
        s.g_ref = pv.stuck_g;
    } else {
        s.g_ref = std::clamp(pv.g_init * std::exp(pv.sigma_ln_g_init * zg), p.g_min, p.g_max);
    }
    return {p, s};
}

}  // namespace nlpuf
