#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blindsim/detectors.hpp"
#include "blindsim/optics.hpp"
#include "blindsim/stats_math.hpp"

namespace blindsim {

struct LevelCounts {
    double level_db = 0.0;
    std::uint64_t slots = 0;
    std::uint64_t click_slots = 0; // slots with any click (single, double or multi)
};

// Everything Bob's post-processing sees, plus the simulator-only Eve
// bookkeeping (control fraction needs Eve's records, which a real Bob does
// not have).
struct MonitorStats {
    std::vector<LevelCounts> per_level;
    std::uint64_t slot_count = 0;
    std::uint64_t click_slots = 0;
    std::uint64_t double_slots = 0;
    std::uint64_t multi_slots = 0;
    std::map<std::string, std::uint64_t> per_detector_clicks;
    std::uint64_t sifted_count = 0;
    std::uint64_t sifted_errors = 0;
    bool eve_present = false;
    std::uint64_t eve_comparable_bits = 0; // sifted bits with an Eve record
    std::uint64_t eve_matched_bits = 0;
    std::uint64_t damage_events = 0;
};

// Legitimate-signal model the runtime tests compare against.
struct ExpectedModel {
    double mu_eta = 0.0; // mean detected photon number per slot at 0 dB
    bool four_detector = true;
};

struct TestResult {
    bool applicable = false;
    double statistic = 0.0;
    double p_value = 1.0;
    std::string note;
};

struct ThetaResult {
    double value = 0.0;
    bool controllable = false;
    bool degenerate = false;
};

struct AttackVerdict {
    bool profile_available = false;
    bool eq1_canonical = false;
    bool eq1_literal = false;
    std::vector<double> thetas;
    bool controllable = false;
    TestResult scaling;
    TestResult double_clicks;
    bool damage = false;
    bool alarm = false;
    double alpha = 0.01;
};

/// Canonical controllability reading of the blinded-detector click
/// condition: max P_100% < 2 · min P_0% over all detectors and indices
/// (consistent with the Θ > 0.5 criterion).
inline bool eq1_predicate(const ThresholdProfile& profile)
{
    double min_p0 = std::numeric_limits<double>::infinity();
    double max_p100 = 0.0;
    for (const auto& [id, bands] : profile.detectors)
        for (const auto& b : bands) {
            min_p0 = std::min(min_p0, b.p_0);
            max_p100 = std::max(max_p100, b.p_100);
        }
    return max_p100 < 2.0 * min_p0;
}

/// Literal as-printed reading: max over indices of the first detector's
/// P_0% against twice the global min P_0%. Logged alongside the canonical
/// form; it compares never-click powers on both sides.
inline bool eq1_literal(const ThresholdProfile& profile)
{
    if (profile.detectors.empty())
        return false;
    double min_p0 = std::numeric_limits<double>::infinity();
    for (const auto& [id, bands] : profile.detectors)
        for (const auto& b : bands)
            min_p0 = std::min(min_p0, b.p_0);
    double max_d0_p0 = 0.0;
    for (const auto& b : profile.detectors.begin()->second)
        max_d0_p0 = std::max(max_d0_p0, b.p_0);
    return max_d0_p0 < 2.0 * min_p0;
}

/// Θ_t = min P_0%(t) / max P_100%(t) over the monitored detectors;
/// controllable iff strictly above one half.
inline ThetaResult theta(const ThresholdProfile& profile, std::size_t t)
{
    ThetaResult r;
    double min_p0 = std::numeric_limits<double>::infinity();
    double max_p100 = 0.0;
    for (const auto& [id, bands] : profile.detectors) {
        if (t >= bands.size())
            continue;
        min_p0 = std::min(min_p0, bands[t].p_0);
        max_p100 = std::max(max_p100, bands[t].p_100);
    }
    if (max_p100 <= 0.0 || !std::isfinite(min_p0)) {
        r.degenerate = true;
        return r;
    }
    r.value = min_p0 / max_p100;
    r.controllable = r.value > 0.5;
    return r;
}

/// Chi-square goodness of fit of per-level click counts against
/// R(a) = R̂0 · 10^(−a/10) with R̂0 the maximum-likelihood rate from the
/// same data. Cells with expectation below 20 are pooled into their
/// lower-attenuation neighbor; the floor keeps every cell in the regime
/// where the chi-square tail is an honest null (Poisson skew at smaller
/// expectations roughly doubles the nominal false-alarm rate).
inline TestResult scaling_test(const MonitorStats& stats, std::size_t min_slots_per_level = 100)
{
    TestResult r;
    std::vector<LevelCounts> usable;
    for (const auto& lc : stats.per_level)
        if (lc.slots >= min_slots_per_level)
            usable.push_back(lc);
    if (usable.size() < 2) {
        r.note = "fewer than two usable attenuation levels";
        return r;
    }
    std::sort(usable.begin(), usable.end(),
              [](const LevelCounts& a, const LevelCounts& b) { return a.level_db < b.level_db; });
    if (usable.front().level_db == usable.back().level_db) {
        r.note = "no attenuation contrast";
        return r;
    }
    std::uint64_t total_clicks = 0;
    double denom = 0.0;
    for (const auto& lc : usable) {
        total_clicks += lc.click_slots;
        denom += static_cast<double>(lc.slots) * db_factor(-lc.level_db);
    }
    r.applicable = true;
    if (total_clicks == 0) {
        // A receiver with no detections at all is as anomalous as a bad fit.
        r.statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        r.note = "zero clicks at every level";
        return r;
    }
    const double r0 = static_cast<double>(total_clicks) / denom;
    // Observed/expected per cell, pooling from the most attenuated end.
    std::vector<double> obs, exp;
    for (const auto& lc : usable) {
        obs.push_back(static_cast<double>(lc.click_slots));
        exp.push_back(r0 * db_factor(-lc.level_db) * static_cast<double>(lc.slots));
    }
    for (std::size_t i = exp.size(); i-- > 1;) {
        if (exp[i] < 20.0) {
            exp[i - 1] += exp[i];
            obs[i - 1] += obs[i];
            exp.erase(exp.begin() + static_cast<std::ptrdiff_t>(i));
            obs.erase(obs.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < exp.size(); ++i)
        if (exp[i] > 0.0)
            chi2 += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
    // df counts the configured levels, not the pooled cells; pooling only
    // stabilizes the statistic, it does not re-parameterize the model
    const double dof = std::max<double>(1.0, static_cast<double>(usable.size()) - 2.0);
    r.statistic = chi2;
    r.p_value = chi_square_tail(chi2, dof);
    return r;
}

namespace detail {

/// Probability that two or more detectors click in one slot under the
/// legitimate Poisson model at detected mean m.
inline double coincidence_probability(double m, bool four_detector)
{
    const auto p_multi = [](const std::vector<double>& mus) {
        double p_none = 1.0;
        for (double mu : mus)
            p_none *= std::exp(-mu);
        double p_one = 0.0;
        for (std::size_t i = 0; i < mus.size(); ++i) {
            double q = 1.0 - std::exp(-mus[i]);
            for (std::size_t j = 0; j < mus.size(); ++j)
                if (j != i)
                    q *= std::exp(-mus[j]);
            p_one += q;
        }
        return 1.0 - p_none - p_one;
    };
    if (four_detector)
        return p_multi({m / 2.0, 0.0, m / 4.0, m / 4.0});
    // Active basis choice: matched half never doubles, wrong half splits.
    return 0.5 * p_multi({m / 2.0, m / 2.0});
}

} // namespace detail

/// One-sided binomial test of the observed double/multi rate against the
/// accidental-coincidence expectation of the legitimate model.
inline TestResult double_click_test(const MonitorStats& stats, const ExpectedModel& model)
{
    TestResult r;
    if (stats.slot_count == 0) {
        r.note = "no slots";
        return r;
    }
    double expected = 0.0;
    for (const auto& lc : stats.per_level)
        expected += static_cast<double>(lc.slots) *
                    detail::coincidence_probability(model.mu_eta * db_factor(-lc.level_db),
                                                    model.four_detector);
    const std::uint64_t observed = stats.double_slots + stats.multi_slots;
    r.applicable = true;
    r.statistic = static_cast<double>(observed);
    r.p_value = binomial_tail_geq(observed, stats.slot_count,
                                  expected / static_cast<double>(stats.slot_count));
    return r;
}

/// Sifted-key error fraction; empty key reported as not-computable.
inline std::optional<double> compute_qber(const MonitorStats& stats)
{
    if (stats.sifted_count == 0)
        return std::nullopt;
    return static_cast<double>(stats.sifted_errors) / static_cast<double>(stats.sifted_count);
}

/// Fraction of sifted bits equal to Eve's resend bit (simulator-only).
inline std::optional<double> eve_control_fraction(const MonitorStats& stats)
{
    if (!stats.eve_present || stats.eve_comparable_bits == 0)
        return std::nullopt;
    return static_cast<double>(stats.eve_matched_bits) /
           static_cast<double>(stats.eve_comparable_bits);
}

/// Aggregate the controllability arithmetic and the runtime tests into the
/// final alarm. The two runtime tests share the significance level by
/// Bonferroni split.
inline AttackVerdict verdict(const MonitorStats& stats, const ThresholdProfile* profile,
                             const ExpectedModel& model, double alpha = 0.01)
{
    AttackVerdict v;
    v.alpha = alpha;
    if (profile != nullptr && !profile->detectors.empty()) {
        v.profile_available = true;
        v.eq1_canonical = eq1_predicate(*profile);
        v.eq1_literal = eq1_literal(*profile);
        std::size_t indices = 0;
        for (const auto& [id, bands] : profile->detectors)
            indices = std::max(indices, bands.size());
        v.controllable = indices > 0;
        for (std::size_t t = 0; t < indices; ++t) {
            const ThetaResult th = theta(*profile, t);
            v.thetas.push_back(th.value);
            v.controllable = v.controllable && th.controllable;
        }
    }
    v.scaling = scaling_test(stats);
    v.double_clicks = double_click_test(stats, model);
    v.damage = stats.damage_events > 0;
    const double each = alpha / 2.0;
    v.alarm = (v.scaling.applicable && v.scaling.p_value < each) ||
              (v.double_clicks.applicable && v.double_clicks.p_value < each) || v.damage;
    return v;
}

} // namespace blindsim
