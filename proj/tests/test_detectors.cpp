#include <doctest.h>

#include <cmath>

#include "blindsim/detectors.hpp"

using namespace blindsim;

namespace {

SlotRng make_rng(std::uint64_t slot = 0) { return SlotRng(123, Stream::DetectorNoise, slot); }

} // namespace

TEST_CASE("passive recharge closed form")
{
    PassiveQuenchParams p;
    CHECK(passive_recharge(0.0, p) == 0.0);
    CHECK(passive_recharge(p.tau_ns * std::log(10.0), p) ==
          doctest::Approx(0.9 * p.v_excess).epsilon(1e-12));
    // armed point lands at ~1 us with the defaults
    CHECK(passive_recharge(1000.0, p) ==
          doctest::Approx(0.9 * p.v_excess).epsilon(0.005));
}

TEST_CASE("passive recharge is strictly increasing and bounded")
{
    PassiveQuenchParams p;
    double prev = -1.0;
    for (double dt = 0.0; dt <= 5000.0; dt += 50.0) {
        const double v = passive_recharge(dt, p);
        CHECK(v > prev);
        CHECK(v <= p.v_excess);
        prev = v;
    }
}

TEST_CASE("a dark interval of five time constants restores nearly full charge")
{
    PassiveQuenchParams p;
    PassiveQuenchState s;
    s.v_c = 0.0;
    auto rng = make_rng();
    DetectorLog log;
    passive_advance(s, p, static_cast<Nanoseconds>(5.0 * p.tau_ns), rng, log);
    CHECK(s.v_c >= 0.993 * p.v_excess);
    CHECK(log.clicks.empty());
}

TEST_CASE("CW bright light produces exactly the onset click, then blindness")
{
    PassiveQuenchParams p;
    PassiveQuenchState s;
    s.v_c = p.v_excess;
    auto rng = make_rng();
    DetectorLog log;
    // 100 us of CW split into segments; only the first rising edge clicks
    for (int i = 0; i < 100; ++i)
        passive_step(s, p, {i * 1000, 1000, false, 0.0, 1e-6, 0.0}, rng, log);
    CHECK(log.clicks.size() == 1);
    CHECK(log.clicks[0] == 0);
    CHECK(s.v_c == 0.0);
}

TEST_CASE("blind detector re-arms during a 2 us blank and clicks on resume")
{
    PassiveQuenchParams p;
    PassiveQuenchState s;
    auto rng = make_rng();
    DetectorLog log;
    passive_step(s, p, {0, 1000, false, 0.0, 1e-6, 0.0}, rng, log); // blinded
    CHECK(log.clicks.empty());                                      // started discharged
    // dark blank of 2 us, then bright resume: V(2 us) = 0.99 V_excess >= armed
    passive_step(s, p, {3000, 1000, false, 0.0, 1e-6, 0.0}, rng, log);
    REQUIRE(log.clicks.size() == 1);
    CHECK(log.clicks[0] == 3000);
}

TEST_CASE("any interval at or above P_hold yields at most one click")
{
    PassiveQuenchParams p;
    SlotRng shape_rng = make_rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        PassiveQuenchState s;
        s.v_c = p.v_excess * shape_rng.next_double();
        auto rng = make_rng(static_cast<std::uint64_t>(trial) + 2);
        DetectorLog log;
        Nanoseconds t = 0;
        for (int i = 0; i < 30; ++i) {
            const Nanoseconds dur = 10 + static_cast<Nanoseconds>(shape_rng.uniform_index(500));
            const double power = p.p_hold_w * (1.0 + shape_rng.next_double() * 1e3);
            passive_step(s, p, {t, dur, false, power, 0.0, 0.0}, rng, log);
            t += dur;
        }
        CHECK(log.clicks.size() <= 1);
        CHECK(s.v_c == 0.0);
    }
}

TEST_CASE("passive damage threshold latches the dead state")
{
    PassiveQuenchParams p;
    PassiveQuenchState s;
    s.v_c = p.v_excess;
    auto rng = make_rng();
    DetectorLog log;
    passive_step(s, p, {0, 100, false, 0.0, p.p_damage_w / 2.0, 0.0}, rng, log);
    CHECK(!s.dead);
    passive_step(s, p, {5000, 100, false, 0.0, p.p_damage_w, 0.0}, rng, log);
    CHECK(s.dead);
    const auto clicks_before = log.clicks.size();
    passive_step(s, p, {20000, 100, false, 0.0, 1e-6, 0.0}, rng, log);
    CHECK(log.clicks.size() == clicks_before);
}

TEST_CASE("active bias point and the exact sag boundary")
{
    ActiveQuenchParams p;
    const auto [v0, m0] = active_bias(0.0, p, p.t0_k);
    CHECK(v0 == p.v_bias);
    CHECK(m0 == ApdMode::Geiger);

    const double p_blind = blinding_power(p, p.t0_k);
    CHECK(p_blind == doctest::Approx(80e-6).epsilon(1e-12));
    // one representable step on either side of the boundary
    const double below = std::nextafter(p_blind, 0.0);
    const double above = std::nextafter(p_blind, 1.0);
    CHECK(active_bias(below, p, p.t0_k).second == ApdMode::Geiger);
    CHECK(active_bias(above, p, p.t0_k).second == ApdMode::Linear);
}

TEST_CASE("thermal path blinds at zero optical power once hot enough")
{
    ActiveQuenchParams p;
    const double t_cross = p.t0_k + (p.v_bias - p.v_br0) / p.beta_v_per_k;
    CHECK(active_bias(0.0, p, t_cross + 0.1).second == ApdMode::Linear);
    CHECK(active_bias(0.0, p, t_cross - 0.1).second == ApdMode::Geiger);
}

TEST_CASE("linear click follows the declared band")
{
    auto rng = make_rng();
    CHECK(!linear_click(0.0, 4e-6, 7e-6, rng));
    CHECK(!linear_click(std::nextafter(4e-6, 0.0), 4e-6, 7e-6, rng));
    CHECK(linear_click(7e-6, 4e-6, 7e-6, rng));
    CHECK(linear_click(14e-6, 4e-6, 7e-6, rng));

    const int n = 100000;
    int clicks = 0;
    for (int i = 0; i < n; ++i)
        clicks += linear_click(5.5e-6, 4e-6, 7e-6, rng) ? 1 : 0;
    const double frac = static_cast<double>(clicks) / n;
    CHECK(std::fabs(frac - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("thermal node: fixed point, monotone rise, decay")
{
    ActiveQuenchParams p;
    ActiveQuenchState s = make_active_state(p);

    // heat within TEC capacity at T0: no temperature change
    thermal_step(s, p.tec_max_w / p.heat_per_watt, 1000000, p);
    CHECK(s.temperature_k == doctest::Approx(p.t0_k).epsilon(1e-12));

    // twice TEC capacity: monotone rise
    double prev = s.temperature_k;
    for (int i = 0; i < 100; ++i) {
        thermal_step(s, 2.0 * p.tec_max_w / p.heat_per_watt, 100000, p);
        CHECK(s.temperature_k >= prev);
        prev = s.temperature_k;
    }
    CHECK(s.temperature_k > p.t0_k);

    // dark: decays back toward T0
    for (int i = 0; i < 100000; ++i)
        thermal_step(s, 0.0, 100000, p);
    CHECK(s.temperature_k == doctest::Approx(p.t0_k).epsilon(1e-6));
}

TEST_CASE("thermal crossing time matches the linear ODE closed form")
{
    ActiveQuenchParams p;
    ActiveQuenchState s = make_active_state(p);
    const double avg_w = 2.0 * p.tec_max_w / p.heat_per_watt; // Q = 2x TEC limit
    const double q_net = 2.0 * p.tec_max_w - p.tec_max_w;
    const double dt_target = (p.v_bias - p.v_br0) / p.beta_v_per_k; // 16 K
    const double t_steady = q_net / p.leak_w_per_k;                 // 20 K
    const double expected_s =
        (p.c_th_j_per_k / p.leak_w_per_k) * std::log(t_steady / (t_steady - dt_target));

    const Nanoseconds dt = 10000;
    Nanoseconds t = 0;
    while (!thermally_blinded(s, p) && t < kSecond) {
        thermal_step(s, avg_w, dt, p);
        t += dt;
    }
    CHECK(static_cast<double>(t) * 1e-9 == doctest::Approx(expected_s).epsilon(0.02));
}

TEST_CASE("active step: CW above the sag threshold suppresses photon clicks")
{
    ActiveQuenchParams p;
    ActiveQuenchState s = make_active_state(p);
    auto rng = make_rng();
    DetectorLog log;
    active_step(s, p, {0, 1000, false, 2.0 * blinding_power(p, p.t0_k), 0.0, 0.0}, rng, log);
    // faint pulse while blinded: no Geiger click possible
    std::size_t before = log.clicks.size();
    for (int i = 0; i < 1000; ++i)
        active_step(s, p, {1000 + i, 1, true, 0.0, 10.0, 0.0}, rng, log);
    CHECK(log.clicks.size() == before);
}

TEST_CASE("active step: faked pulse clicks only above the band while blinded")
{
    ActiveQuenchParams p;
    auto run_pulse = [&](double pulse_w) {
        ActiveQuenchState s = make_active_state(p);
        auto rng = make_rng();
        DetectorLog log;
        const double carrier = 2.0 * blinding_power(p, p.t0_k);
        active_step(s, p, {0, 1000, false, carrier, 0.0, 0.0}, rng, log);
        const std::size_t before = log.clicks.size();
        active_step(s, p, {1000, 50, false, carrier + pulse_w, 0.0, 0.0}, rng, log);
        return log.clicks.size() - before;
    };
    CHECK(run_pulse(p.p_0_w * 0.9) == 0);
    CHECK(run_pulse(p.p_100_w * 1.1) == 1);
}

TEST_CASE("gated step: silence outside gate, after-gate band, in-gate avalanche")
{
    GatedParams p;
    const Nanoseconds gate_end = p.gate_offset_ns + p.gate_width_ns;
    auto fresh = [&](const OpticalSegment& seg) {
        GatedState s;
        auto rng = make_rng();
        DetectorLog log;
        gated_step(s, p, seg, 0, rng, log);
        return log.clicks.size();
    };
    // faint pulse outside gate and window: below breakdown, no click
    CHECK(fresh({gate_end + p.after_gate_window_ns + 5, 1, true, 0.0, 10.0, 0.0}) == 0);
    // bright pulse 5 ns after gate end at the always-click power
    CHECK(fresh({gate_end + 5, 1, false, 0.0, p.p_100_w, 0.0}) == 1);
    // same pulse beyond the window
    CHECK(fresh({gate_end + p.after_gate_window_ns + 5, 1, false, 0.0, p.p_100_w, 0.0}) == 0);
    // bright pulse during the gate: uncontrolled Geiger avalanche
    CHECK(fresh({p.gate_offset_ns + 1, 1, false, 0.0, p.p_100_w, 0.0}) == 1);
    // below the never-click power in the after-gate window
    CHECK(fresh({gate_end + 5, 1, false, 0.0, p.p_0_w * 0.9, 0.0}) == 0);
}

TEST_CASE("gated step: dark slots stay silent without dark counts")
{
    GatedParams p;
    GatedState s;
    auto rng = make_rng();
    DetectorLog log;
    for (int slot = 0; slot < 1000; ++slot)
        gated_step(s, p, {slot * 1000 + 50, 900, false, 0.0, 0.0, 0.0}, slot * 1000, rng, log);
    CHECK(log.clicks.empty());
}

TEST_CASE("threshold characterization recovers a configured band")
{
    const double p0 = 4e-6, p100 = 8e-6;
    std::vector<double> grid;
    for (int i = 0; i < 64; ++i)
        grid.push_back(1e-6 + 15e-6 * i / 63.0);
    auto rng = make_rng();
    auto oracle = [&](std::size_t, double power, SlotRng& r) {
        return linear_click(power, p0, p100, r);
    };
    const auto res = characterize_thresholds(oracle, 1, grid, 10000, rng);
    REQUIRE(res.indices.size() == 1);
    const double step = 15e-6 / 63.0;
    CHECK(res.indices[0].bracketed);
    CHECK(res.indices[0].in_linear_mode);
    CHECK(std::fabs(res.indices[0].band.p_0 - p0) <= step);
    CHECK(std::fabs(res.indices[0].band.p_100 - p100) <= step);
    CHECK(res.indices[0].band.p_0 < res.indices[0].band.p_100);
}

TEST_CASE("characterization flags dead and Geiger-mode detectors")
{
    std::vector<double> grid = {1e-6, 2e-6, 4e-6};
    auto rng = make_rng();
    auto dead = [](std::size_t, double, SlotRng&) { return false; };
    const auto res_dead = characterize_thresholds(dead, 1, grid, 100, rng);
    CHECK(!res_dead.indices[0].bracketed);

    // Geiger-mode: faint powers already click some of the time
    auto geiger = [](std::size_t, double, SlotRng& r) { return r.bernoulli(0.05); };
    const auto res_geiger = characterize_thresholds(geiger, 1, grid, 10000, rng);
    CHECK(!res_geiger.indices[0].in_linear_mode);
}
