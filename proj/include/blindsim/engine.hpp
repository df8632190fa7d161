#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blindsim/attack.hpp"
#include "blindsim/monitor.hpp"
#include "blindsim/station.hpp"

namespace blindsim {

struct ScenarioConfig {
    Nanoseconds tick_ns = 1;
    Nanoseconds slot_period_ns = 10000;
    std::uint64_t slots = 100000;
    std::uint64_t seed = 1;
    DetectorClass detector_class = DetectorClass::Active;
    bool four_detector = true;
    PassiveQuenchParams passive;
    ActiveQuenchParams active;
    GatedParams gated;
    AliceParams alice;
    EveStrategy eve;
    VoaSchedule voa;
    double alpha = 0.01;

    double detector_eta() const
    {
        switch (detector_class) {
        case DetectorClass::Passive: return passive.eta;
        case DetectorClass::Active: return active.eta;
        case DetectorClass::Gated: return gated.eta;
        }
        return 0.0;
    }

    /// First violated constraint, or nullopt if the scenario is runnable.
    std::optional<std::string> validate() const
    {
        if (tick_ns <= 0)
            return "engine.tick_ns must be positive";
        if (!is_tick_aligned(slot_period_ns, tick_ns) || slot_period_ns <= 0)
            return "engine.slot_period_ns must be a positive multiple of the tick";
        if (!(alice.mu > 0.0))
            return "alice.mu must be positive";
        if (alice.channel_loss_db < 0.0)
            return "alice.channel_loss_db must be >= 0";
        if (alice.pulse_offset_ns < 0 || alice.pulse_offset_ns + alice.pulse_width_ns > slot_period_ns)
            return "alice.pulse_offset_ns places the pulse outside the slot";
        if (detector_eta() < 0.0 || detector_eta() > 1.0)
            return "detector eta must lie in [0, 1]";
        switch (detector_class) {
        case DetectorClass::Passive: {
            const double armed_ns = passive.tau_ns * std::log(1.0 / (1.0 - passive.f_armed));
            if (static_cast<double>(slot_period_ns) <=
                armed_ns + static_cast<double>(eve.blank_ns))
                return "engine.slot_period_ns must exceed the passive recharge plus blank time";
            if (passive.v_excess < 6.0 || passive.v_excess > 10.0)
                return "passive.v_excess outside the 6-10 V validation range";
            if (!(passive.tau_ns > 0.0) || !(passive.f_armed > 0.0) || passive.f_armed > 1.0)
                return "passive recharge parameters out of range";
            break;
        }
        case DetectorClass::Active:
            if (slot_period_ns <= active.dead_time_ns)
                return "engine.slot_period_ns must exceed the active dead time";
            if (!(active.v_bias > active.v_br0))
                return "active.v_bias must exceed active.v_br0";
            if (!(active.r_bias_ohm > 0.0))
                return "active.r_bias_ohm must be positive";
            if (!(active.p_0_w < active.p_100_w))
                return "active threshold band requires p_0 < p_100";
            if (!(active.p_damage_w > active.p_100_w))
                return "active.p_damage_w must exceed the always-click power";
            break;
        case DetectorClass::Gated:
            if (gated.gate_width_ns >= gated.gate_period_ns)
                return "gated.gate_width_ns must be below the gate period";
            if (slot_period_ns < gated.gate_period_ns)
                return "engine.slot_period_ns must cover one gate period";
            if (gated.gate_offset_ns + gated.gate_width_ns + gated.after_gate_window_ns >
                slot_period_ns)
                return "gated gate plus after-gate window exceeds the slot";
            if (!(gated.p_0_w < gated.p_100_w))
                return "gated threshold band requires p_0 < p_100";
            break;
        }
        if (auto err = voa.validate())
            return *err;
        if (auto err = eve.validate(voa.max_db))
            return *err;
        return std::nullopt;
    }

    /// Threshold profile the configured detector bank realizes (the ground
    /// truth Eve is granted under the strongest-adversary convention).
    ThresholdProfile configured_profile() const
    {
        ThresholdProfile profile;
        if (detector_class == DetectorClass::Passive)
            return profile; // no linear-mode band exists for the passive circuit
        const double p0 = detector_class == DetectorClass::Active ? active.p_0_w : gated.p_0_w;
        const double p100 =
            detector_class == DetectorClass::Active ? active.p_100_w : gated.p_100_w;
        const std::vector<std::string> ids =
            four_detector ? std::vector<std::string>{"D0R", "D1R", "D0D", "D1D"}
                          : std::vector<std::string>{"D0", "D1"};
        for (const auto& id : ids)
            profile.detectors[id] = {ThresholdBand{p0, p100}};
        return profile;
    }

    TopologyGains topology_gains() const
    {
        return four_detector ? TopologyGains{4.0, 2.0} : TopologyGains{2.0, 1.0};
    }

    ExpectedModel expected_model() const
    {
        return {alice.mu_after_channel() * detector_eta(), four_detector};
    }
};

struct SlotRecord {
    std::uint64_t slot = 0;
    int alice_bit = 0;
    Basis alice_basis = Basis::Rectilinear;
    bool eve_present = false;
    Basis eve_basis = Basis::Rectilinear;
    int eve_bit = 0;
    bool eve_abstain = true;
    std::optional<Basis> bob_basis;
    double voa_db = 0.0;
    OutcomeKind outcome = OutcomeKind::None;
    std::vector<std::string> detectors;
    Nanoseconds click_time_ns = -1; // relative to slot start
    bool sifted = false;
    bool error = false;
};

struct ScenarioReport {
    ScenarioConfig config;
    std::vector<SlotRecord> slots;
    MonitorStats stats;
    AttackVerdict verdict;
    std::map<std::string, std::uint64_t> detector_clicks;
    std::vector<std::pair<std::string, Nanoseconds>> damage_events;
    bool thermally_blinded = false;
    Nanoseconds thermal_blind_time_ns = -1;

    std::optional<double> qber() const { return compute_qber(stats); }
    std::optional<double> eve_control() const { return eve_control_fraction(stats); }
    double click_rate() const
    {
        return stats.slot_count == 0
                   ? 0.0
                   : static_cast<double>(stats.click_slots) / static_cast<double>(stats.slot_count);
    }
};

// Single-threaded deterministic core of one scenario run. All randomness is
// drawn from per-(stream, slot) counter generators, so slot evaluation is
// order-independent and the whole run replays bit-identically from
// (config, seed).
class Engine {
public:
    explicit Engine(const ScenarioConfig& cfg)
        : cfg_(cfg),
          bank_(cfg.detector_class, cfg.four_detector, cfg.passive, cfg.active, cfg.gated),
          profile_(cfg.configured_profile()), gains_(cfg.topology_gains())
    {
    }

    SlotRecord advance_slot(std::uint64_t slot)
    {
        const Nanoseconds slot_start =
            static_cast<Nanoseconds>(slot) * cfg_.slot_period_ns;
        const Nanoseconds slot_end = slot_start + cfg_.slot_period_ns;
        SlotRecord rec;
        rec.slot = slot;

        SlotRng bit_rng(cfg_.seed, Stream::AliceBits, slot);
        SlotRng basis_rng(cfg_.seed, Stream::AliceBasis, slot);
        const OpticalSegment alice_pulse =
            alice_emit(slot_start, cfg_.alice, bit_rng, basis_rng, rec.alice_bit,
                       rec.alice_basis);

        Waveform at_bob = eve_transform(slot, slot_start, alice_pulse, rec);

        SlotRng voa_rng(cfg_.seed, Stream::BobVoa, slot);
        rec.voa_db = bob_voa_level(slot, cfg_.voa, voa_rng);
        if (!cfg_.four_detector) {
            SlotRng bob_basis_rng(cfg_.seed, Stream::BobBasis, slot);
            const Basis b = bob_basis_rng.uniform_index(2) == 0 ? Basis::Rectilinear
                                                                : Basis::Diagonal;
            rec.bob_basis = b;
            bank_.set_active_basis(b);
        }

        SlotRng noise_rng(cfg_.seed, Stream::DetectorNoise, slot);
        const Waveform incident = apply_attenuation(std::move(at_bob), rec.voa_db);
        const ClickOutcome outcome =
            bank_.step_slot(incident, slot_start, slot_end, noise_rng);

        rec.outcome = outcome.kind;
        rec.click_time_ns = outcome.first_click_ns;
        for (std::size_t idx : outcome.detectors)
            rec.detectors.push_back(bank_.channel(idx).id);
        if (cfg_.four_detector)
            rec.bob_basis = outcome.basis;

        sifted_append(rec);
        update_stats(rec);
        if (cfg_.detector_class == DetectorClass::Active && !thermal_blind_seen_ &&
            thermally_blinded(bank_.active_state(0), cfg_.active)) {
            thermal_blind_seen_ = true;
            thermal_blind_time_ = slot_end;
        }
        return rec;
    }

    ScenarioReport finish(std::vector<SlotRecord> slots)
    {
        ScenarioReport report;
        report.config = cfg_;
        report.slots = std::move(slots);
        for (std::size_t i = 0; i < bank_.size(); ++i) {
            const auto& log = bank_.log(i);
            report.detector_clicks[bank_.channel(i).id] = log.clicks.size();
            for (Nanoseconds t : log.damage)
                report.damage_events.emplace_back(bank_.channel(i).id, t);
            stats_.per_detector_clicks[bank_.channel(i).id] = log.clicks.size();
            stats_.damage_events += log.damage.size();
        }
        report.thermally_blinded = thermal_blind_seen_;
        report.thermal_blind_time_ns = thermal_blind_seen_ ? thermal_blind_time_ : -1;
        report.stats = stats_;
        const ExpectedModel model = cfg_.expected_model();
        const bool has_profile = !profile_.detectors.empty();
        report.verdict =
            verdict(stats_, has_profile ? &profile_ : nullptr, model, cfg_.alpha);
        return report;
    }

    const DetectorBank& bank() const { return bank_; }

private:
    Waveform eve_transform(std::uint64_t slot, Nanoseconds slot_start,
                           const OpticalSegment& alice_pulse, SlotRecord& rec)
    {
        const EveVariant variant = cfg_.eve.variant;
        if (variant == EveVariant::None) {
            Waveform w;
            w.segments.push_back(alice_pulse);
            return w;
        }
        rec.eve_present = true;
        SlotRng eve_rng(cfg_.seed, Stream::EveBasis, slot);
        EveSlotAction action;
        bool clicked = false;
        eve_intercept(alice_pulse.pol_power, alice_pulse.pol_angle_deg, cfg_.eve.eta_eve,
                      eve_rng, action.basis, action.bit, clicked);
        action.abstain = !clicked;
        rec.eve_basis = action.basis;
        rec.eve_bit = action.bit;
        rec.eve_abstain = action.abstain;

        const EveVariant effective = cfg_.eve.effective_variant();
        Waveform w;
        switch (effective) {
        case EveVariant::InterceptResendOnly:
            if (!action.abstain) {
                OpticalSegment resend = alice_pulse;
                resend.pol_power = cfg_.eve.resend_mu;
                resend.pol_angle_deg = bb84_angle_deg(action.basis, action.bit);
                w.segments.push_back(resend);
            }
            break;
        case EveVariant::PassiveBlind:
            w = generate_faked_state_passive(action, cfg_.eve, eve_prev_pol_, gains_,
                                             slot_start, cfg_.slot_period_ns);
            if (!action.abstain)
                eve_prev_pol_ = bb84_angle_deg(action.basis, action.bit);
            break;
        case EveVariant::AfterGate:
            w = generate_after_gate(action, cfg_.eve, profile_, gains_, slot_start,
                                    cfg_.gated);
            break;
        case EveVariant::ActiveBlindCW:
        case EveVariant::ActiveBlindPulsed:
        case EveVariant::ThermalBlind:
        default:
            w = generate_faked_state_active(action, cfg_.eve, profile_, gains_, slot_start,
                                            cfg_.slot_period_ns);
            break;
        }
        if (variant == EveVariant::PowerCompensated)
            w = apply_power_compensation(std::move(w), cfg_.eve.compensation_db);
        return w;
    }

    void sifted_append(SlotRecord& rec)
    {
        const bool is_bit =
            rec.outcome == OutcomeKind::Bit0 || rec.outcome == OutcomeKind::Bit1;
        rec.sifted = is_bit && rec.bob_basis && *rec.bob_basis == rec.alice_basis;
        if (rec.sifted) {
            const int bob_bit = rec.outcome == OutcomeKind::Bit0 ? 0 : 1;
            rec.error = bob_bit != rec.alice_bit;
        }
    }

    void update_stats(const SlotRecord& rec)
    {
        ++stats_.slot_count;
        auto it = std::find_if(stats_.per_level.begin(), stats_.per_level.end(),
                               [&](const LevelCounts& lc) { return lc.level_db == rec.voa_db; });
        if (it == stats_.per_level.end()) {
            stats_.per_level.push_back({rec.voa_db, 0, 0});
            it = std::prev(stats_.per_level.end());
        }
        ++it->slots;
        if (rec.outcome != OutcomeKind::None) {
            ++stats_.click_slots;
            ++it->click_slots;
        }
        if (rec.outcome == OutcomeKind::Double)
            ++stats_.double_slots;
        if (rec.outcome == OutcomeKind::Multi)
            ++stats_.multi_slots;
        if (rec.sifted) {
            ++stats_.sifted_count;
            if (rec.error)
                ++stats_.sifted_errors;
            if (rec.eve_present && !rec.eve_abstain) {
                ++stats_.eve_comparable_bits;
                const int bob_bit = rec.outcome == OutcomeKind::Bit0 ? 0 : 1;
                if (bob_bit == rec.eve_bit)
                    ++stats_.eve_matched_bits;
            }
        }
        stats_.eve_present = stats_.eve_present || rec.eve_present;
    }

    ScenarioConfig cfg_;
    DetectorBank bank_;
    ThresholdProfile profile_;
    TopologyGains gains_;
    MonitorStats stats_;
    std::optional<double> eve_prev_pol_;
    bool thermal_blind_seen_ = false;
    Nanoseconds thermal_blind_time_ = -1;
};

/// Validate and run a whole scenario; deterministic in (config, seed).
inline ScenarioReport run_scenario(const ScenarioConfig& cfg)
{
    if (auto err = cfg.validate())
        throw std::invalid_argument(*err);
    Engine engine(cfg);
    std::vector<SlotRecord> slots;
    slots.reserve(cfg.slots);
    for (std::uint64_t s = 0; s < cfg.slots; ++s)
        slots.push_back(engine.advance_slot(s));
    return engine.finish(std::move(slots));
}

} // namespace blindsim
