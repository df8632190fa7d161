#include <doctest.h>

#include <cmath>

#include "blindsim/monitor.hpp"

using namespace blindsim;

namespace {

ThresholdProfile profile2(double p0a, double p0b, double p100a, double p100b)
{
    ThresholdProfile t;
    t.detectors["D0"] = {ThresholdBand{p0a, p100a}};
    t.detectors["D1"] = {ThresholdBand{p0b, p100b}};
    return t;
}

} // namespace

TEST_CASE("theta arithmetic and the strict boundary")
{
    const ThetaResult boundary = theta(profile2(4e-6, 5e-6, 7e-6, 8e-6), 0);
    CHECK(boundary.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(!boundary.controllable); // strictly greater than one half required

    const ThetaResult ok = theta(profile2(4e-6, 4e-6, 7e-6, 7e-6), 0);
    CHECK(ok.value == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(ok.controllable);

    // degenerate band collapses to ratio one
    const ThetaResult tight = theta(profile2(5e-6, 5e-6, 5e-6, 5e-6), 0);
    CHECK(tight.value == doctest::Approx(1.0).epsilon(1e-12));

    const ThetaResult zero = theta(profile2(4e-6, 4e-6, 0.0, 0.0), 0);
    CHECK(zero.degenerate);
}

TEST_CASE("controllability predicate examples")
{
    CHECK(eq1_predicate(profile2(4e-6, 4e-6, 7e-6, 7e-6)));  // 7 < 8
    CHECK(!eq1_predicate(profile2(3e-6, 3e-6, 7e-6, 7e-6))); // 7 >= 6

    ThresholdProfile single;
    const double p0 = 5e-6, eps = 1e-9;
    single.detectors["D0"] = {ThresholdBand{p0, p0 + eps}};
    CHECK(eq1_predicate(single));
}

TEST_CASE("canonical predicate agrees with theta on random constant profiles")
{
    SlotRng rng(99, Stream::DetectorNoise, 0);
    for (int i = 0; i < 1000; ++i) {
        const double p0a = 1e-6 + rng.next_double() * 9e-6;
        const double p0b = 1e-6 + rng.next_double() * 9e-6;
        const double p100a = p0a + rng.next_double() * 9e-6;
        const double p100b = p0b + rng.next_double() * 9e-6;
        const auto profile = profile2(p0a, p0b, p100a, p100b);
        CHECK(eq1_predicate(profile) == theta(profile, 0).controllable);
    }
}

TEST_CASE("theta is monotone in the band endpoints")
{
    SlotRng rng(98, Stream::DetectorNoise, 0);
    for (int i = 0; i < 200; ++i) {
        const double p0 = 1e-6 + rng.next_double() * 5e-6;
        const double p100 = p0 + rng.next_double() * 5e-6;
        const double bump = rng.next_double() * 2e-6;
        const double base = theta(profile2(p0, p0, p100, p100), 0).value;
        CHECK(theta(profile2(p0 + bump, p0, p100, p100), 0).value >= base);
        CHECK(theta(profile2(p0, p0, p100 + bump, p100), 0).value <= base);
    }
}

namespace {

MonitorStats stats_from_rates(const std::vector<std::pair<double, double>>& level_rate,
                              std::uint64_t slots_per_level)
{
    MonitorStats s;
    for (const auto& [level, rate] : level_rate) {
        LevelCounts lc;
        lc.level_db = level;
        lc.slots = slots_per_level;
        lc.click_slots = static_cast<std::uint64_t>(rate * static_cast<double>(slots_per_level));
        s.per_level.push_back(lc);
        s.slot_count += lc.slots;
        s.click_slots += lc.click_slots;
    }
    return s;
}

} // namespace

TEST_CASE("scaling test accepts data that follows the attenuation law")
{
    const double r0 = 0.05;
    const auto stats = stats_from_rates(
        {{0.0, r0}, {10.0, r0 * 0.1}, {20.0, r0 * 0.01}, {30.0, r0 * 0.001}}, 100000);
    const TestResult r = scaling_test(stats);
    CHECK(r.applicable);
    CHECK(r.p_value > 0.5); // exact law, tiny rounding only
}

TEST_CASE("scaling test rejects a step-shaped click profile")
{
    const auto stats = stats_from_rates(
        {{0.0, 0.1}, {10.0, 0.1}, {20.0, 0.0}, {30.0, 0.0}}, 25000);
    const TestResult r = scaling_test(stats);
    CHECK(r.applicable);
    CHECK(r.p_value < 1e-6);
}

TEST_CASE("scaling test edge cases")
{
    // single level: no contrast
    const auto one = stats_from_rates({{0.0, 0.05}}, 100000);
    CHECK(!scaling_test(one).applicable);

    // zero clicks everywhere is itself maximally anomalous
    const auto silent = stats_from_rates({{0.0, 0.0}, {10.0, 0.0}}, 100000);
    const TestResult r = scaling_test(silent);
    CHECK(r.applicable);
    CHECK(r.p_value == 0.0);

    // below the slot floor: inapplicable
    const auto thin = stats_from_rates({{0.0, 0.5}, {10.0, 0.05}}, 10);
    CHECK(!scaling_test(thin).applicable);
}

TEST_CASE("chi-square tail against tabulated critical values")
{
    CHECK(chi_square_tail(3.841, 1.0) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(chi_square_tail(5.991, 2.0) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(chi_square_tail(6.635, 1.0) == doctest::Approx(0.01).epsilon(0.01));
    CHECK(chi_square_tail(0.0, 3.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("binomial tail against a direct summation oracle")
{
    // P(X >= k) for X ~ Binomial(10, 0.1), summed directly
    const auto direct = [](int k, int n, double p) {
        double sum = 0.0;
        for (int i = k; i <= n; ++i) {
            double c = 1.0;
            for (int j = 0; j < i; ++j)
                c = c * (n - j) / (j + 1);
            sum += c * std::pow(p, i) * std::pow(1.0 - p, n - i);
        }
        return sum;
    };
    for (int k = 0; k <= 10; ++k)
        CHECK(binomial_tail_geq(static_cast<std::uint64_t>(k), 10, 0.1) ==
              doctest::Approx(direct(k, 10, 0.1)).epsilon(1e-9));
    CHECK(binomial_tail_geq(0, 100, 0.3) == 1.0);
    CHECK(binomial_tail_geq(101, 100, 0.3) == 0.0);
}

TEST_CASE("double-click test flags an excess of coincidences")
{
    ExpectedModel model{0.05, true};
    auto stats = stats_from_rates({{0.0, 0.05}}, 100000);
    stats.double_slots = 30; // legitimate expectation is ~77 per 1e5 at mu_eta = 0.05
    const TestResult mild = double_click_test(stats, model);
    CHECK(mild.applicable);

    MonitorStats attacked = stats;
    attacked.double_slots = 2000;
    const TestResult hot = double_click_test(attacked, model);
    CHECK(hot.p_value < 1e-9);
    CHECK(hot.p_value < mild.p_value);
}

TEST_CASE("coincidence model is far below the naive squared estimate at small mu")
{
    // the exact Poisson accidental rate, not (mu_eta/2)^2, calibrates the
    // false-alarm budget; sanity-check the closed form at mu_eta = 0.05
    const double p = detail::coincidence_probability(0.05, true);
    CHECK(p > 0.0);
    CHECK(p < 0.05 * 0.05);
    // two-detector active basis halves the exposure
    CHECK(detail::coincidence_probability(0.05, false) < p);
}

TEST_CASE("qber and control fraction handle empty inputs")
{
    MonitorStats s;
    CHECK(!compute_qber(s).has_value());
    CHECK(!eve_control_fraction(s).has_value());
    s.sifted_count = 100;
    s.sifted_errors = 25;
    CHECK(compute_qber(s).value() == doctest::Approx(0.25).epsilon(1e-12));
    s.eve_present = true;
    s.eve_comparable_bits = 50;
    s.eve_matched_bits = 50;
    CHECK(eve_control_fraction(s).value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("verdict aggregates tests, damage and controllability")
{
    const auto clean = stats_from_rates(
        {{0.0, 0.05}, {10.0, 0.005}, {20.0, 0.0005}, {30.0, 0.00005}}, 100000);
    const auto profile = profile2(4e-6, 4e-6, 7e-6, 7e-6);
    ExpectedModel model{0.05, true};
    const AttackVerdict ok = verdict(clean, &profile, model, 0.01);
    CHECK(!ok.alarm);
    CHECK(ok.profile_available);
    CHECK(ok.controllable);
    CHECK(ok.thetas.size() == 1);

    // damage alone must alarm, regardless of the statistics
    MonitorStats damaged = clean;
    damaged.damage_events = 1;
    CHECK(verdict(damaged, &profile, model, 0.01).alarm);

    // no profile: controllability reported as unavailable
    const AttackVerdict blind = verdict(clean, nullptr, model, 0.01);
    CHECK(!blind.profile_available);
}
