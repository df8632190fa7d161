#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blindsim/detectors.hpp"
#include "blindsim/optics.hpp"

namespace blindsim {

struct AliceParams {
    double mu = 0.1;             // mean photon number per pulse at the source
    double channel_loss_db = 0.0;
    Nanoseconds pulse_offset_ns = 100;
    Nanoseconds pulse_width_ns = 1;

    double mu_after_channel() const { return mu * db_factor(-channel_loss_db); }
};

/// Draw bit and basis (separate streams) and emit the slot's faint pulse
/// (mean photon number already reduced by the channel loss, i.e. as seen at
/// Eve's position).
inline OpticalSegment alice_emit(Nanoseconds slot_start, const AliceParams& p,
                                 SlotRng& bit_rng, SlotRng& basis_rng, int& bit, Basis& basis)
{
    bit = bit_rng.uniform_index(2) == 0 ? 0 : 1;
    basis = basis_rng.uniform_index(2) == 0 ? Basis::Rectilinear : Basis::Diagonal;
    OpticalSegment pulse;
    pulse.start = slot_start + p.pulse_offset_ns;
    pulse.duration = p.pulse_width_ns;
    pulse.quantum = true;
    pulse.pol_power = p.mu_after_channel();
    pulse.pol_angle_deg = bb84_angle_deg(basis, bit);
    return pulse;
}

enum class VoaMode { Fixed, IidUniform, FrequencyScan };

// Bob's secret attenuation schedule. The realized sequence is a function of
// (seed, bob-voa stream) only; nothing in the attack module ever sees it.
struct VoaSchedule {
    VoaMode mode = VoaMode::Fixed;
    double fixed_db = 0.0;
    std::vector<double> levels = {0.0, 10.0, 20.0, 30.0};
    std::vector<double> pattern;       // frequency-scan levels
    std::uint64_t pattern_phase = 0;   // secret phase offset
    double max_db = 80.0;

    std::optional<std::string> validate() const
    {
        const auto bad = [this](double a) { return !(a >= 0.0) || a > max_db; };
        if (mode == VoaMode::Fixed && bad(fixed_db))
            return "bob.voa_fixed_db outside [0, " + std::to_string(max_db) + "] dB";
        if (mode == VoaMode::IidUniform) {
            if (levels.empty())
                return "bob.voa_levels is empty";
            for (double a : levels)
                if (bad(a))
                    return "bob.voa_levels entry outside [0, " + std::to_string(max_db) + "] dB";
        }
        if (mode == VoaMode::FrequencyScan) {
            if (pattern.empty())
                return "bob.voa_pattern is empty";
            for (double a : pattern)
                if (bad(a))
                    return "bob.voa_pattern entry outside [0, " + std::to_string(max_db) + "] dB";
        }
        return std::nullopt;
    }
};

/// The slot's attenuation draw (logged by the caller).
inline double bob_voa_level(std::uint64_t slot, const VoaSchedule& s, SlotRng& rng)
{
    switch (s.mode) {
    case VoaMode::Fixed:
        return s.fixed_db;
    case VoaMode::IidUniform:
        return s.levels[rng.uniform_index(s.levels.size())];
    case VoaMode::FrequencyScan:
        return s.pattern[(slot + s.pattern_phase) % s.pattern.size()];
    }
    return s.fixed_db;
}

enum class OutcomeKind { None, Bit0, Bit1, Double, Multi };

struct ClickOutcome {
    OutcomeKind kind = OutcomeKind::None;
    std::vector<std::size_t> detectors; // indices into the bank
    Nanoseconds first_click_ns = -1;
    std::optional<Basis> basis; // arm of the click (or Bob's active choice)
};

// One physical detector behind the splitter tree.
struct DetectorChannel {
    std::string id;
    Basis arm = Basis::Rectilinear;
    int bit = 0;
    double arm_fraction = 1.0; // share of the station input reaching this PBS
    double axis_deg = 0.0;     // analyzer axis this detector sits behind
};

// Bob's detector bank: either the passive four-detector tree (BS + two PBS)
// or an actively switched two-detector analyzer. Detector circuit state
// persists across slots; parameter blocks are shared per class.
class DetectorBank {
public:
    DetectorBank(DetectorClass cls, bool four_detector, const PassiveQuenchParams& pp,
                 const ActiveQuenchParams& ap, const GatedParams& gp)
        : class_(cls), four_detector_(four_detector), passive_params_(pp), active_params_(ap),
          gated_params_(gp)
    {
        if (four_detector_) {
            channels_ = {
                {"D0R", Basis::Rectilinear, 0, 0.5, 0.0},
                {"D1R", Basis::Rectilinear, 1, 0.5, 90.0},
                {"D0D", Basis::Diagonal, 0, 0.5, 45.0},
                {"D1D", Basis::Diagonal, 1, 0.5, 135.0},
            };
        } else {
            channels_ = {
                {"D0", Basis::Rectilinear, 0, 1.0, 0.0},
                {"D1", Basis::Rectilinear, 1, 1.0, 90.0},
            };
        }
        passive_states_.assign(channels_.size(), PassiveQuenchState{});
        for (auto& st : passive_states_)
            st.v_c = pp.v_excess; // fully charged at power-up
        active_states_.assign(channels_.size(), make_active_state(ap));
        gated_states_.assign(channels_.size(), GatedState{});
        logs_.assign(channels_.size(), DetectorLog{});
    }

    std::size_t size() const { return channels_.size(); }
    const DetectorChannel& channel(std::size_t i) const { return channels_[i]; }
    const DetectorLog& log(std::size_t i) const { return logs_[i]; }
    DetectorClass detector_class() const { return class_; }
    bool four_detector() const { return four_detector_; }
    const ActiveQuenchParams& active_params() const { return active_params_; }
    const PassiveQuenchParams& passive_params() const { return passive_params_; }
    const GatedParams& gated_params() const { return gated_params_; }
    const ActiveQuenchState& active_state(std::size_t i) const { return active_states_[i]; }

    bool any_dead() const
    {
        for (std::size_t i = 0; i < channels_.size(); ++i)
            if (dead(i))
                return true;
        return false;
    }

    bool dead(std::size_t i) const
    {
        switch (class_) {
        case DetectorClass::Passive: return passive_states_[i].dead;
        case DetectorClass::Active: return active_states_[i].dead;
        case DetectorClass::Gated: return gated_states_[i].dead;
        }
        return false;
    }

    std::uint64_t damage_event_count() const
    {
        std::uint64_t n = 0;
        for (const auto& log : logs_)
            n += log.damage.size();
        return n;
    }

    /// Re-aim the two-detector analyzer (HWP) at Bob's basis for this slot.
    void set_active_basis(Basis b)
    {
        assert(!four_detector_);
        const double axis = analyzer_angle_deg(b);
        channels_[0].arm = b;
        channels_[0].axis_deg = axis;
        channels_[1].arm = b;
        channels_[1].axis_deg = axis + 90.0;
    }

    /// Step every detector through the slot's (post-VOA) waveform and
    /// classify the click pattern.
    ClickOutcome step_slot(const Waveform& incident, Nanoseconds slot_start,
                           Nanoseconds slot_end, SlotRng& noise_rng,
                           double thermal_avg_power_w = -1.0)
    {
        std::vector<std::size_t> clicks_before(channels_.size());
        for (std::size_t i = 0; i < channels_.size(); ++i)
            clicks_before[i] = logs_[i].clicks.size();

        double energy_j = 0.0;
        for (const auto& seg : incident.segments) {
            for (std::size_t i = 0; i < channels_.size(); ++i) {
                OpticalSegment share = seg;
                const auto& ch = channels_[i];
                share.pol_power =
                    project_onto_basis(seg.pol_power, seg.pol_angle_deg, ch.axis_deg).first *
                    ch.arm_fraction;
                share.unpol_power = 0.5 * seg.unpol_power * ch.arm_fraction;
                step_one(i, share, slot_start, noise_rng);
            }
            if (!seg.quantum)
                energy_j += seg.total_power() * static_cast<double>(seg.duration) * 1e-9;
        }
        if (class_ == DetectorClass::Active) {
            // Lumped thermal update once per slot from the slot-average
            // detector-incident power (the four channels share one mount; use
            // the per-channel unpolarized share as the representative load).
            const double slot_s = static_cast<double>(slot_end - slot_start) * 1e-9;
            double avg = thermal_avg_power_w;
            if (avg < 0.0) {
                const double frac = channels_.front().arm_fraction * 0.5;
                avg = energy_j * frac / slot_s;
            }
            for (auto& st : active_states_)
                thermal_step(st, avg, slot_end - slot_start, active_params_);
        }
        if (class_ == DetectorClass::Passive) {
            for (std::size_t i = 0; i < channels_.size(); ++i)
                if (!passive_states_[i].illuminated)
                    passive_advance(passive_states_[i], passive_params_, slot_end, noise_rng,
                                    logs_[i]);
        }
        return classify(clicks_before, slot_start);
    }

private:
    void step_one(std::size_t i, const OpticalSegment& share, Nanoseconds slot_start,
                  SlotRng& rng)
    {
        switch (class_) {
        case DetectorClass::Passive:
            passive_step(passive_states_[i], passive_params_, share, rng, logs_[i]);
            break;
        case DetectorClass::Active:
            active_step(active_states_[i], active_params_, share, rng, logs_[i]);
            break;
        case DetectorClass::Gated:
            gated_step(gated_states_[i], gated_params_, share, slot_start, rng, logs_[i]);
            break;
        }
    }

    ClickOutcome classify(const std::vector<std::size_t>& clicks_before,
                          Nanoseconds slot_start) const
    {
        ClickOutcome out;
        Nanoseconds first = -1;
        for (std::size_t i = 0; i < channels_.size(); ++i) {
            if (logs_[i].clicks.size() > clicks_before[i]) {
                out.detectors.push_back(i);
                const Nanoseconds t = logs_[i].clicks[clicks_before[i]];
                if (first < 0 || t < first)
                    first = t;
            }
        }
        out.first_click_ns = first < 0 ? -1 : first - slot_start;
        if (out.detectors.empty()) {
            out.kind = OutcomeKind::None;
            return out;
        }
        if (out.detectors.size() == 1) {
            const auto& ch = channels_[out.detectors[0]];
            out.kind = ch.bit == 0 ? OutcomeKind::Bit0 : OutcomeKind::Bit1;
            out.basis = ch.arm;
            return out;
        }
        if (out.detectors.size() == 2 &&
            channels_[out.detectors[0]].arm == channels_[out.detectors[1]].arm) {
            out.kind = OutcomeKind::Double;
            out.basis = channels_[out.detectors[0]].arm;
            return out;
        }
        out.kind = OutcomeKind::Multi;
        return out;
    }

    DetectorClass class_;
    bool four_detector_;
    PassiveQuenchParams passive_params_;
    ActiveQuenchParams active_params_;
    GatedParams gated_params_;
    std::vector<DetectorChannel> channels_;
    std::vector<PassiveQuenchState> passive_states_;
    std::vector<ActiveQuenchState> active_states_;
    std::vector<GatedState> gated_states_;
    std::vector<DetectorLog> logs_;
};

} // namespace blindsim
