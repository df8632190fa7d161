#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include "blindsim/detectors.hpp"
#include "blindsim/optics.hpp"

namespace blindsim {

enum class EveVariant {
    None,
    InterceptResendOnly,
    PassiveBlind,
    ActiveBlindCW,
    ActiveBlindPulsed,
    ThermalBlind,
    AfterGate,
    PowerCompensated,
};

// How Eve's waveform-level powers map to detector-incident powers through
// Bob's splitter tree. carrier: unpolarized light (BS + PBS halvings);
// pulse: polarized light onto its matched detector.
struct TopologyGains {
    double carrier = 4.0;
    double pulse = 2.0;
};

struct EveStrategy {
    EveVariant variant = EveVariant::None;
    double p_cw_w = 160e-6;  // blinding carrier, detector-incident
    double p_fake_w = 0.0;   // faked pulse, detector-incident; 0 = derive from thresholds
    Nanoseconds blank_ns = 2000;
    Nanoseconds fake_pulse_width_ns = 50;
    Nanoseconds fake_pulse_offset_ns = -1; // -1 = mid slot
    double pulse_rate_hz = 1e6;            // pulsed / thermal carriers
    Nanoseconds carrier_pulse_width_ns = 500;
    double pulse_energy_j = 4e-9;          // thermal carrier, per pulse at the detector
    double compensation_db = 0.0;
    EveVariant base = EveVariant::ActiveBlindCW; // for PowerCompensated
    double eta_eve = 1.0;
    double resend_mu = 0.1;       // intercept-resend source intensity
    double knowledge_error = 0.0; // multiplicative error on the derived p_fake

    std::optional<std::string> validate(double compensation_ceiling_db = 80.0) const
    {
        if (variant == EveVariant::ActiveBlindPulsed && pulse_rate_hz <= 7e4)
            return "eve.pulse_rate_hz: pulsed blinding requires a rate above 70 kHz";
        if (variant == EveVariant::PowerCompensated &&
            compensation_db > compensation_ceiling_db)
            return "eve.compensation_db exceeds the attenuation ceiling";
        if (blank_ns < 0 || p_cw_w < 0.0 || p_fake_w < 0.0)
            return "eve: negative power or duration";
        return std::nullopt;
    }

    EveVariant effective_variant() const
    {
        return variant == EveVariant::PowerCompensated ? base : variant;
    }
};

struct EveSlotAction {
    Basis basis = Basis::Rectilinear;
    int bit = 0;
    bool abstain = true; // Eve's own measurement saw nothing
    bool control_infeasible = false;
    Waveform resend;
};

/// Intercept measurement of Alice's faint pulse in a uniformly random basis.
inline void eve_intercept(double mu_at_eve, double alice_angle_deg, double eta_eve,
                          SlotRng& rng, Basis& basis, int& bit, bool& clicked)
{
    basis = rng.uniform_index(2) == 0 ? Basis::Rectilinear : Basis::Diagonal;
    clicked = sample_photocount(mu_at_eve, eta_eve, rng) >= 1;
    const auto [p0, p1] = project_onto_basis(1.0, alice_angle_deg, analyzer_angle_deg(basis));
    (void)p0;
    bit = rng.bernoulli(p1) ? 1 : 0;
}

/// Faked-pulse power from a characterized profile: midpoint of the control
/// interval [max P_100%, 2·min P_0%] when it exists; otherwise the attack is
/// flagged infeasible and Eve falls back to the smallest always-click power.
struct FakePowerChoice {
    double p_fake_w = 0.0;
    bool infeasible = false;
};

inline FakePowerChoice choose_fake_power(const ThresholdProfile& profile)
{
    double min_p0 = std::numeric_limits<double>::infinity();
    double max_p100 = 0.0;
    for (const auto& [id, bands] : profile.detectors)
        for (const auto& b : bands) {
            min_p0 = std::min(min_p0, b.p_0);
            max_p100 = std::max(max_p100, b.p_100);
        }
    FakePowerChoice c;
    if (max_p100 < 2.0 * min_p0) {
        c.p_fake_w = 0.5 * (max_p100 + 2.0 * min_p0);
    } else {
        c.p_fake_w = max_p100;
        c.infeasible = true;
    }
    return c;
}

/// Insert a polarized pulse into a waveform, splitting any carrier segment
/// it overlaps so segments stay non-overlapping.
inline Waveform overlay_pulse(const Waveform& base, const OpticalSegment& pulse)
{
    Waveform out;
    const Nanoseconds p_start = pulse.start;
    const Nanoseconds p_end = pulse.start + pulse.duration;
    Nanoseconds covered = p_start; // part of the pulse already merged into carrier
    for (const auto& seg : base.segments) {
        const Nanoseconds s_start = seg.start;
        const Nanoseconds s_end = seg.start + seg.duration;
        if (s_end <= p_start || s_start >= p_end) {
            out.segments.push_back(seg);
            continue;
        }
        const Nanoseconds o_start = std::max(s_start, p_start);
        const Nanoseconds o_end = std::min(s_end, p_end);
        if (s_start < o_start) {
            OpticalSegment before = seg;
            before.duration = o_start - s_start;
            out.segments.push_back(before);
        }
        if (covered < o_start) {
            OpticalSegment bare = pulse;
            bare.start = covered;
            bare.duration = o_start - covered;
            out.segments.push_back(bare);
        }
        OpticalSegment merged = seg;
        merged.start = o_start;
        merged.duration = o_end - o_start;
        merged.pol_power += pulse.pol_power;
        merged.pol_angle_deg = pulse.pol_angle_deg;
        out.segments.push_back(merged);
        covered = o_end;
        if (o_end < s_end) {
            OpticalSegment after = seg;
            after.start = o_end;
            after.duration = s_end - o_end;
            out.segments.push_back(after);
        }
    }
    if (covered < p_end) {
        OpticalSegment tail = pulse;
        tail.start = covered;
        tail.duration = p_end - covered;
        out.segments.push_back(tail);
    }
    std::sort(out.segments.begin(), out.segments.end(),
              [](const OpticalSegment& a, const OpticalSegment& b) { return a.start < b.start; });
    return out;
}

namespace detail {

inline Waveform blinding_carrier(const EveStrategy& st, const TopologyGains& gains,
                                 Nanoseconds slot_start, Nanoseconds slot_period)
{
    Waveform w;
    const EveVariant v = st.effective_variant();
    if (v == EveVariant::ActiveBlindCW) {
        w.segments.push_back({slot_start, slot_period, false,
                              st.p_cw_w * gains.carrier, 0.0, 0.0});
        return w;
    }
    // Pulsed or thermal carrier: a pulse train at the strategy rate.
    const auto period_ns = static_cast<Nanoseconds>(1e9 / st.pulse_rate_hz);
    const Nanoseconds width = std::min(st.carrier_pulse_width_ns, period_ns / 2);
    double peak = st.p_cw_w * gains.carrier;
    if (v == EveVariant::ThermalBlind)
        peak = st.pulse_energy_j * gains.carrier / (static_cast<double>(width) * 1e-9);
    for (Nanoseconds t = 0; t + width <= slot_period; t += period_ns)
        w.segments.push_back({slot_start + t, width, false, peak, 0.0, 0.0});
    return w;
}

} // namespace detail

/// Blinding carrier plus one polarized faked pulse sized against the target
/// thresholds (active and CW-blinded gated detectors).
inline Waveform generate_faked_state_active(EveSlotAction& action, const EveStrategy& st,
                                            const ThresholdProfile& thresholds,
                                            const TopologyGains& gains,
                                            Nanoseconds slot_start, Nanoseconds slot_period)
{
    Waveform w = detail::blinding_carrier(st, gains, slot_start, slot_period);
    if (action.abstain)
        return w;
    double p_fake = st.p_fake_w;
    if (p_fake <= 0.0) {
        const auto choice = choose_fake_power(thresholds);
        p_fake = choice.p_fake_w * (1.0 + st.knowledge_error);
        action.control_infeasible = choice.infeasible;
    }
    const Nanoseconds offset =
        st.fake_pulse_offset_ns >= 0 ? st.fake_pulse_offset_ns : slot_period / 2;
    OpticalSegment pulse;
    pulse.start = slot_start + offset;
    pulse.duration = st.fake_pulse_width_ns;
    pulse.pol_power = p_fake * gains.pulse;
    pulse.pol_angle_deg = bb84_angle_deg(action.basis, action.bit);
    return overlay_pulse(w, pulse);
}

/// Passive-detector faked state: bright carrier, a blank that re-arms the
/// detectors, then light polarized in Eve's state until the next blank. The
/// rising edge at the end of the blank is the controlled click.
inline Waveform generate_faked_state_passive(const EveSlotAction& action, const EveStrategy& st,
                                             std::optional<double> prev_pol_deg,
                                             const TopologyGains& gains,
                                             Nanoseconds slot_start, Nanoseconds slot_period)
{
    Waveform w;
    const double carrier = st.p_cw_w * gains.carrier;
    if (action.abstain) {
        OpticalSegment seg{slot_start, slot_period, false, 0.0, 0.0, 0.0};
        if (prev_pol_deg) {
            seg.pol_power = carrier;
            seg.pol_angle_deg = *prev_pol_deg;
        } else {
            seg.unpol_power = carrier;
        }
        w.segments.push_back(seg);
        return w;
    }
    const Nanoseconds blank = std::min(st.blank_ns, slot_period);
    if (slot_period > blank)
        w.segments.push_back({slot_start + blank, slot_period - blank, false, 0.0, carrier,
                              bb84_angle_deg(action.basis, action.bit)});
    return w;
}

/// After-gate faked state: one polarized pulse inside the post-gate window,
/// no optical energy during the gate itself.
inline Waveform generate_after_gate(EveSlotAction& action, const EveStrategy& st,
                                    const ThresholdProfile& thresholds,
                                    const TopologyGains& gains, Nanoseconds slot_start,
                                    const GatedParams& gate)
{
    Waveform w;
    if (action.abstain)
        return w;
    double p_fake = st.p_fake_w;
    if (p_fake <= 0.0) {
        const auto choice = choose_fake_power(thresholds);
        p_fake = choice.p_fake_w * (1.0 + st.knowledge_error);
        action.control_infeasible = choice.infeasible;
    }
    const Nanoseconds gate_end = gate.gate_offset_ns + gate.gate_width_ns;
    const Nanoseconds offset = st.fake_pulse_offset_ns >= 0 ? st.fake_pulse_offset_ns
                                                            : gate.after_gate_window_ns / 2;
    OpticalSegment pulse;
    pulse.start = slot_start + gate_end + offset;
    pulse.duration = std::max<Nanoseconds>(
        1, std::min(st.fake_pulse_width_ns, gate.after_gate_window_ns / 2));
    pulse.pol_power = p_fake * gains.pulse;
    pulse.pol_angle_deg = bb84_angle_deg(action.basis, action.bit);
    w.segments.push_back(pulse);
    return w;
}

/// Boost every power by 10^(gain/10): Eve pre-compensating Bob's attenuator.
inline Waveform apply_power_compensation(Waveform w, double gain_db)
{
    return apply_attenuation(std::move(w), -gain_db);
}

} // namespace blindsim
