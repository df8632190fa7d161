#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blindsim/optics.hpp"
#include "blindsim/rng.hpp"
#include "blindsim/time.hpp"

namespace blindsim {

enum class DetectorClass { Passive, Active, Gated };

enum class ApdMode { Geiger, Linear, Dead };

struct DetectorLog {
    std::vector<Nanoseconds> clicks;
    std::vector<Nanoseconds> damage; // at most one entry; Dead is absorbing
};

// ---------------------------------------------------------------------------
// Passively quenched Si APD: a capacitor recharges through a large resistor;
// an avalanche dumps it. Bright light holds it discharged (blind); the
// detector can only click again once V_C has recovered past the armed
// fraction.
// ---------------------------------------------------------------------------

struct PassiveQuenchParams {
    double v_excess = 8.0;   // volts above breakdown when fully charged (6..10)
    double tau_ns = 434.0;   // recharge RC constant; armed point lands at ~1 us
    double f_armed = 0.9;    // click-capable above this fraction of v_excess
    double eta = 0.5;
    double dark_rate_hz = 0.0;
    double p_hold_w = 1e-9;  // CW power that keeps the junction conducting
    double p_damage_w = 10e-3;
};

struct PassiveQuenchState {
    double v_c = 0.0; // volts above breakdown, 0 = fully discharged
    Nanoseconds last_time = 0;
    bool illuminated = false;
    bool dead = false;
};

/// Recharge from fully discharged: V(Δt) = V_excess · (1 − e^(−Δt/τ)).
inline double passive_recharge(double dt_ns, const PassiveQuenchParams& p)
{
    return p.v_excess * (1.0 - std::exp(-dt_ns / p.tau_ns));
}

inline bool passive_armed(const PassiveQuenchState& s, const PassiveQuenchParams& p)
{
    return s.v_c >= p.f_armed * p.v_excess;
}

namespace detail {

inline double relax_toward_full(double v, double dt_ns, const PassiveQuenchParams& p)
{
    return p.v_excess + (v - p.v_excess) * std::exp(-dt_ns / p.tau_ns);
}

} // namespace detail

/// Advance a passive detector through a dark interval ending at `until`.
inline void passive_advance(PassiveQuenchState& s, const PassiveQuenchParams& p,
                            Nanoseconds until, SlotRng& rng, DetectorLog& log)
{
    const Nanoseconds dt = until - s.last_time;
    if (dt <= 0)
        return;
    s.illuminated = false;
    if (!s.dead && p.dark_rate_hz > 0.0) {
        const double mean = p.dark_rate_hz * static_cast<double>(dt) * 1e-9;
        if (rng.poisson(mean) >= 1 && passive_armed(s, p)) {
            log.clicks.push_back(s.last_time + dt / 2);
            s.v_c = 0.0;
        }
    }
    s.v_c = detail::relax_toward_full(s.v_c, static_cast<double>(dt), p);
    s.last_time = until;
}

/// Step one optical segment (detector-incident power). Clicks fire on the
/// rising edge iff the capacitor is armed; light at or above p_hold keeps
/// V_C pinned at zero for the segment's duration.
inline void passive_step(PassiveQuenchState& s, const PassiveQuenchParams& p,
                         const OpticalSegment& seg, SlotRng& rng, DetectorLog& log)
{
    passive_advance(s, p, seg.start, rng, log);
    const Nanoseconds end = seg.start + seg.duration;
    if (s.dead) {
        s.last_time = end;
        return;
    }
    if (seg.quantum) {
        const bool armed = passive_armed(s, p);
        if (sample_photocount(seg.total_power(), p.eta, rng) >= 1 && armed) {
            log.clicks.push_back(seg.start);
            s.v_c = 0.0;
        }
        s.v_c = detail::relax_toward_full(s.v_c, static_cast<double>(seg.duration), p);
        s.last_time = end;
        return;
    }
    const double power = seg.total_power();
    if (power < p.p_hold_w) {
        // below the conduction threshold: optically dark for circuit purposes
        passive_advance(s, p, end, rng, log);
        return;
    }
    if (power >= p.p_damage_w) {
        s.dead = true;
        log.damage.push_back(seg.start);
        s.last_time = end;
        return;
    }
    if (passive_armed(s, p))
        log.clicks.push_back(seg.start);
    s.v_c = 0.0; // held discharged while the bright light lasts
    s.illuminated = true;
    s.last_time = end;
}

// ---------------------------------------------------------------------------
// Actively quenched Si APD with fixed bias through R_bias and a lumped
// thermal node under a saturating TEC. Bright CW current sags the bias below
// breakdown (linear mode); sustained heat raises the breakdown voltage past
// the fixed bias (thermal blinding).
// ---------------------------------------------------------------------------

struct ActiveQuenchParams {
    double v_bias = 108.0;
    double v_br0 = 100.0;  // breakdown at reference temperature
    double t0_k = 250.0;
    double beta_v_per_k = 0.5;
    double r_bias_ohm = 10e3;
    double responsivity_a_per_w = 10.0;
    double p_0_w = 4e-6;   // largest never-click faked-pulse power (blinded)
    double p_100_w = 7e-6; // smallest always-click faked-pulse power (blinded)
    double eta = 0.5;
    double dark_rate_hz = 0.0;
    Nanoseconds dead_time_ns = 50;
    double p_sat_w = 1e-9;          // classical power that avalanche-saturates Geiger mode
    Nanoseconds sag_recovery_ns = 15000; // linear mode persists this long after bright light
    Nanoseconds ac_coupling_ns = 200;    // comparator baseline settles past this duration
    double tec_max_w = 0.1;
    double c_th_j_per_k = 5e-5;
    double leak_w_per_k = 5e-3;
    double heat_per_watt = 50.0;    // lumped optical+avalanche heating coefficient
    double p_damage_w = 10e-3;
};

struct ActiveQuenchState {
    double temperature_k = 0.0; // initialize to params.t0_k
    Nanoseconds dead_until = 0;
    Nanoseconds linear_until = 0; // bias-sag hold window
    double baseline_power = 0.0;  // slow comparator baseline the excess is measured against
    bool dead = false;
    Nanoseconds last_time = 0;
};

inline ActiveQuenchState make_active_state(const ActiveQuenchParams& p)
{
    ActiveQuenchState s;
    s.temperature_k = p.t0_k;
    return s;
}

inline double breakdown_voltage(const ActiveQuenchParams& p, double temperature_k)
{
    return p.v_br0 + p.beta_v_per_k * (temperature_k - p.t0_k);
}

/// CW blinding threshold: the power whose photocurrent sags the bias to the
/// breakdown voltage.
inline double blinding_power(const ActiveQuenchParams& p, double temperature_k)
{
    return (p.v_bias - breakdown_voltage(p, temperature_k)) /
           (p.r_bias_ohm * p.responsivity_a_per_w);
}

/// Bias point under CW illumination: I = S·P, V_apd = V_bias − I·R_bias;
/// linear mode iff V_apd has fallen below the (temperature-dependent)
/// breakdown voltage.
inline std::pair<double, ApdMode> active_bias(double p_cw_w, const ActiveQuenchParams& p,
                                              double temperature_k)
{
    const double v_apd = p.v_bias - p.responsivity_a_per_w * p_cw_w * p.r_bias_ohm;
    // The V_apd < V_br comparison is done in power space so the flip sits
    // exactly at the blinding power, one representable step either side.
    const ApdMode mode =
        p_cw_w > blinding_power(p, temperature_k) ? ApdMode::Linear : ApdMode::Geiger;
    return {v_apd, mode};
}

/// Linear-mode click decision for a pulse of the given excess power against
/// a (P_0%, P_100%) band, linearly interpolated in between.
inline bool linear_click(double p_pulse_w, double p_0_w, double p_100_w, SlotRng& rng)
{
    if (p_pulse_w < p_0_w)
        return false;
    if (p_pulse_w >= p_100_w)
        return true;
    return rng.bernoulli((p_pulse_w - p_0_w) / (p_100_w - p_0_w));
}

/// Lumped thermal node: heat in = coefficient · average optical power, TEC
/// removes up to its saturation limit, the rest leaks to the mount.
inline void thermal_step(ActiveQuenchState& s, double avg_power_w, Nanoseconds dt_ns,
                         const ActiveQuenchParams& p)
{
    const double q = p.heat_per_watt * avg_power_w;
    const double removed = std::min(q, p.tec_max_w);
    const double dt_s = static_cast<double>(dt_ns) * 1e-9;
    s.temperature_k += (q - removed - p.leak_w_per_k * (s.temperature_k - p.t0_k)) /
                       p.c_th_j_per_k * dt_s;
}

inline bool thermally_blinded(const ActiveQuenchState& s, const ActiveQuenchParams& p)
{
    return breakdown_voltage(p, s.temperature_k) > p.v_bias;
}

inline void active_step(ActiveQuenchState& s, const ActiveQuenchParams& p,
                        const OpticalSegment& seg, SlotRng& rng, DetectorLog& log)
{
    const Nanoseconds end = seg.start + seg.duration;
    if (s.dead) {
        s.last_time = end;
        return;
    }
    // A dark gap longer than the coupling window resets the baseline.
    if (seg.start - s.last_time > p.ac_coupling_ns)
        s.baseline_power = 0.0;

    if (seg.quantum) {
        const bool linear = seg.start < s.linear_until || thermally_blinded(s, p);
        if (!linear && seg.start >= s.dead_until &&
            sample_photocount(seg.total_power(), p.eta, rng) >= 1) {
            log.clicks.push_back(seg.start);
            s.dead_until = seg.start + p.dead_time_ns;
        }
        s.last_time = end;
        return;
    }

    const double power = seg.total_power();
    if (power >= p.p_damage_w) {
        s.dead = true;
        log.damage.push_back(seg.start);
        s.last_time = end;
        return;
    }
    const auto [v_apd, mode] = active_bias(power, p, s.temperature_k);
    if (mode == ApdMode::Linear && power > 0.0)
        s.linear_until = std::max(s.linear_until, end + p.sag_recovery_ns);

    const bool linear = mode == ApdMode::Linear || seg.start < s.linear_until;
    if (linear) {
        const double excess = std::max(0.0, power - s.baseline_power);
        if (linear_click(excess, p.p_0_w, p.p_100_w, rng))
            log.clicks.push_back(seg.start);
    } else if (power >= p.p_sat_w) {
        // Geiger mode hit by macroscopic light: one uncontrolled avalanche at
        // onset, then the junction is saturated and silent.
        if (s.baseline_power < p.p_sat_w && seg.start >= s.dead_until) {
            log.clicks.push_back(seg.start);
            s.dead_until = seg.start + p.dead_time_ns;
        }
    }
    if (seg.duration >= p.ac_coupling_ns)
        s.baseline_power = power;
    s.last_time = end;
}

// ---------------------------------------------------------------------------
// Gated InGaAs APD: biased below breakdown except during the gate; faked
// pulses in the ~10 ns window right after the gate still register through
// the decaying overbias (linear-mode band), and CW bright light sags the
// bias exactly as in the active circuit.
// ---------------------------------------------------------------------------

struct GatedParams {
    Nanoseconds gate_period_ns = 1000;
    Nanoseconds gate_width_ns = 3;
    Nanoseconds gate_offset_ns = 100; // gate start within the slot
    Nanoseconds after_gate_window_ns = 10;
    double dc_undervoltage_v = 2.0; // volts below breakdown outside the gate
    double gate_overbias_v = 3.0;   // volts above breakdown during the gate
    double r_bias_ohm = 10e3;
    double responsivity_a_per_w = 10.0;
    double p_0_w = 4e-6;
    double p_100_w = 7e-6;
    // Optional time dependence of the after-gate band; offset is ns past gate
    // end. Null means the constant (p_0_w, p_100_w) band.
    std::function<std::pair<double, double>(Nanoseconds)> after_gate_band;
    double eta = 0.2;
    double dark_rate_hz = 0.0;
    double p_sat_w = 1e-9;
    Nanoseconds sag_recovery_ns = 15000;
    Nanoseconds ac_coupling_ns = 200;
    double p_damage_w = 10e-3;
};

struct GatedState {
    Nanoseconds linear_until = 0;
    double baseline_power = 0.0;
    bool dead = false;
    Nanoseconds last_time = 0;
};

/// CW power that keeps the gated APD below breakdown even while gated.
inline double gated_blinding_power(const GatedParams& p)
{
    return p.gate_overbias_v / (p.r_bias_ohm * p.responsivity_a_per_w);
}

inline std::pair<double, double> after_gate_band_at(const GatedParams& p, Nanoseconds offset)
{
    if (p.after_gate_band)
        return p.after_gate_band(offset);
    return {p.p_0_w, p.p_100_w};
}

/// Step one segment against the slot's gate. Clicks inside the gate come
/// from Geiger-mode detection (or uncontrolled avalanches on bright pulses);
/// clicks in the after-gate window follow the band; everything else is below
/// breakdown and silent.
inline void gated_step(GatedState& s, const GatedParams& p, const OpticalSegment& seg,
                       Nanoseconds slot_start, SlotRng& rng, DetectorLog& log)
{
    const Nanoseconds end = seg.start + seg.duration;
    if (s.dead) {
        s.last_time = end;
        return;
    }
    if (seg.start - s.last_time > p.ac_coupling_ns)
        s.baseline_power = 0.0;

    const Nanoseconds gate_start = slot_start + p.gate_offset_ns;
    const Nanoseconds gate_end = gate_start + p.gate_width_ns;
    const bool in_gate = seg.start < gate_end && end > gate_start;
    const bool in_after_gate = seg.start >= gate_end &&
                               seg.start < gate_end + p.after_gate_window_ns;

    if (seg.quantum) {
        const bool blinded = seg.start < s.linear_until;
        if (in_gate && !blinded && sample_photocount(seg.total_power(), p.eta, rng) >= 1)
            log.clicks.push_back(seg.start);
        s.last_time = end;
        return;
    }

    const double power = seg.total_power();
    if (power >= p.p_damage_w) {
        s.dead = true;
        log.damage.push_back(seg.start);
        s.last_time = end;
        return;
    }
    if (power >= gated_blinding_power(p))
        s.linear_until = std::max(s.linear_until, end + p.sag_recovery_ns);

    if (seg.start < s.linear_until) {
        // CW-blinded: behaves like the active circuit, gate or no gate.
        const double excess = std::max(0.0, power - s.baseline_power);
        if (linear_click(excess, p.p_0_w, p.p_100_w, rng))
            log.clicks.push_back(seg.start);
    } else if (in_gate) {
        if (power >= p.p_sat_w && s.baseline_power < p.p_sat_w)
            log.clicks.push_back(seg.start); // uncontrolled Geiger avalanche
    } else if (in_after_gate) {
        const auto [p0, p100] = after_gate_band_at(p, seg.start - gate_end);
        if (linear_click(power, p0, p100, rng))
            log.clicks.push_back(seg.start);
    }
    if (seg.duration >= p.ac_coupling_ns)
        s.baseline_power = power;
    s.last_time = end;
}

/// Latch any detector state dead if the incident power reaches the damage
/// threshold; the damage event is logged once.
template <typename State>
inline bool check_damage(double p_incident_w, double p_damage_w, State& state,
                         Nanoseconds t, DetectorLog& log)
{
    if (!state.dead && p_incident_w >= p_damage_w) {
        state.dead = true;
        log.damage.push_back(t);
    }
    return state.dead;
}

// ---------------------------------------------------------------------------
// Threshold characterization (the inputs to the controllability tests).
// ---------------------------------------------------------------------------

struct ThresholdBand {
    double p_0 = 0.0;
    double p_100 = 0.0;
};

struct ThresholdProfile {
    // detector id -> band per sample index (time bin after the gate, or a
    // single index for free-running detectors)
    std::map<std::string, std::vector<ThresholdBand>> detectors;

    bool consistent() const
    {
        for (const auto& [id, bands] : detectors)
            for (const auto& b : bands)
                if (!(b.p_0 < b.p_100))
                    return false;
        return true;
    }
};

struct CharacterizationIndex {
    ThresholdBand band;
    bool bracketed = true;         // false: grid never reached p_hi click fraction
    bool in_linear_mode = true;    // false: faint powers already click (Geiger)
};

struct CharacterizationResult {
    std::vector<CharacterizationIndex> indices;
};

/// Sweep a strictly increasing power grid against a per-trial click oracle.
/// P_0% is the largest grid power whose click fraction stays at or below
/// p_lo; P_100% the smallest reaching p_hi.
inline CharacterizationResult characterize_thresholds(
    const std::function<bool(std::size_t index, double power_w, SlotRng&)>& click_trial,
    std::size_t index_count, const std::vector<double>& power_grid_w, std::size_t trials,
    SlotRng& rng, double p_lo = 0.001, double p_hi = 0.999)
{
    CharacterizationResult result;
    for (std::size_t idx = 0; idx < index_count; ++idx) {
        CharacterizationIndex out;
        bool found_p0 = false;
        bool found_p100 = false;
        for (std::size_t g = 0; g < power_grid_w.size(); ++g) {
            std::size_t clicks = 0;
            for (std::size_t t = 0; t < trials; ++t)
                clicks += click_trial(idx, power_grid_w[g], rng) ? 1 : 0;
            const double frac = static_cast<double>(clicks) / static_cast<double>(trials);
            if (frac <= p_lo) {
                out.band.p_0 = power_grid_w[g];
                found_p0 = true;
            } else if (g == 0) {
                out.in_linear_mode = false; // clicks at the faintest grid power
                out.band.p_0 = 0.0;
            }
            if (!found_p100 && frac >= p_hi) {
                out.band.p_100 = power_grid_w[g];
                found_p100 = true;
            }
        }
        (void)found_p0;
        out.bracketed = found_p100;
        result.indices.push_back(out);
    }
    return result;
}

} // namespace blindsim
