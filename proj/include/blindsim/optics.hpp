#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "blindsim/rng.hpp"
#include "blindsim/time.hpp"

namespace blindsim {

enum class Basis : int { Rectilinear = 0, Diagonal = 1 };

/// Polarization angle of a BB84 state, degrees from horizontal.
/// Rectilinear: bit0 = H (0°), bit1 = V (90°). Diagonal: bit0 = D (45°), bit1 = A (135°).
constexpr double bb84_angle_deg(Basis basis, int bit)
{
    return (basis == Basis::Rectilinear ? 0.0 : 45.0) + (bit ? 90.0 : 0.0);
}

/// Analyzer transmission-axis angle of a basis arm (HWP folded in).
constexpr double analyzer_angle_deg(Basis basis)
{
    return basis == Basis::Rectilinear ? 0.0 : 45.0;
}

inline double db_factor(double db) { return std::pow(10.0, db / 10.0); }

// Piecewise-constant optical sample. Power splits into an unpolarized
// component and a linearly polarized component so that a polarized faked
// pulse can ride on an unpolarized blinding carrier within one segment.
// When `quantum` is set the power fields hold mean photon number per
// segment instead of watts.
struct OpticalSegment {
    Nanoseconds start = 0;
    Nanoseconds duration = 0;
    bool quantum = false;
    double unpol_power = 0.0;
    double pol_power = 0.0;
    double pol_angle_deg = 0.0;

    double total_power() const { return unpol_power + pol_power; }
};

// Time-ordered, non-overlapping segments covering (parts of) one slot.
// Gaps mean zero power.
struct Waveform {
    std::vector<OpticalSegment> segments;

    bool well_formed() const
    {
        Nanoseconds t = std::numeric_limits<Nanoseconds>::min();
        for (const auto& s : segments) {
            if (s.duration <= 0 || s.unpol_power < 0.0 || s.pol_power < 0.0)
                return false;
            if (s.start < t)
                return false;
            t = s.start + s.duration;
        }
        return true;
    }
};

/// Scale every segment power (watts or μ) by 10^(−a/10).
inline Waveform apply_attenuation(Waveform w, double attenuation_db)
{
    const double f = db_factor(-attenuation_db);
    for (auto& s : w.segments) {
        s.unpol_power *= f;
        s.pol_power *= f;
    }
    return w;
}

/// Malus split of a linearly polarized power onto an analyzer axis.
/// Returns (transmitted → D0, reflected → D1); the pair sums to `power`
/// exactly by construction.
inline std::pair<double, double> project_onto_basis(double power, double state_angle_deg,
                                                    double analyzer_axis_deg)
{
    const double delta = (state_angle_deg - analyzer_axis_deg) * std::numbers::pi / 180.0;
    const double c = std::cos(delta);
    const double d0 = power * c * c;
    return {d0, power - d0};
}

/// Power a single detector sees from a segment: `arm_fraction` of the slot
/// power reaches its PBS, unpolarized light splits evenly, polarized light
/// follows Malus' law.
inline double detector_share(const OpticalSegment& s, double arm_fraction,
                             double analyzer_axis_deg)
{
    const double pol = project_onto_basis(s.pol_power, s.pol_angle_deg, analyzer_axis_deg).first;
    return arm_fraction * (0.5 * s.unpol_power + pol);
}

/// Ideal 50/50 beam splitter: both arms get half the power, polarization
/// unchanged.
inline std::pair<OpticalSegment, OpticalSegment> split_passive(const OpticalSegment& s)
{
    OpticalSegment half = s;
    half.unpol_power *= 0.5;
    half.pol_power *= 0.5;
    return {half, half};
}

/// Poisson photocount with mean μ·η.
inline std::uint64_t sample_photocount(double mu, double eta, SlotRng& rng)
{
    return rng.poisson(mu * eta);
}

} // namespace blindsim
