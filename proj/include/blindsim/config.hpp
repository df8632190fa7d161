#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blindsim/engine.hpp"

namespace blindsim {

// Flat-sectioned key/value scenario files:
//
//   [engine]
//   slots = 100000
//   [eve]
//   strategy = active-blind-cw
//
// Unknown sections or keys are hard errors so a typo cannot silently turn a
// countermeasure off.

namespace config_detail {

inline std::optional<double> parse_double(const std::string& s)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::optional<std::int64_t> parse_int(const std::string& s)
{
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline std::optional<std::vector<double>> parse_double_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = parse_double(item);
        if (!v)
            return std::nullopt;
        out.push_back(*v);
    }
    if (out.empty())
        return std::nullopt;
    return out;
}

inline std::string trim(std::string s)
{
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front()))
        s.erase(s.begin());
    while (!s.empty() && is_space(s.back()))
        s.pop_back();
    return s;
}

} // namespace config_detail

/// Apply one `section.key = value` assignment. Returns an error message for
/// unknown keys or malformed values; this is also the sweep surface.
inline std::optional<std::string> config_set(ScenarioConfig& cfg, const std::string& key,
                                             const std::string& value)
{
    using config_detail::parse_double;
    using config_detail::parse_double_list;
    using config_detail::parse_int;

    const auto bad_value = [&]() -> std::optional<std::string> {
        return "invalid value '" + value + "' for key '" + key + "'";
    };
    const auto set_d = [&](double& field) -> std::optional<std::string> {
        if (auto v = parse_double(value)) {
            field = *v;
            return std::nullopt;
        }
        return bad_value();
    };
    const auto set_ns = [&](Nanoseconds& field) -> std::optional<std::string> {
        if (auto v = parse_int(value)) {
            field = *v;
            return std::nullopt;
        }
        return bad_value();
    };
    const auto set_u64 = [&](std::uint64_t& field) -> std::optional<std::string> {
        if (auto v = parse_int(value); v && *v >= 0) {
            field = static_cast<std::uint64_t>(*v);
            return std::nullopt;
        }
        return bad_value();
    };

    if (key == "engine.slots") return set_u64(cfg.slots);
    if (key == "engine.slot_period_ns") return set_ns(cfg.slot_period_ns);
    if (key == "engine.tick_ns") return set_ns(cfg.tick_ns);
    if (key == "engine.seed") return set_u64(cfg.seed);

    if (key == "detector.class") {
        if (value == "passive") cfg.detector_class = DetectorClass::Passive;
        else if (value == "active") cfg.detector_class = DetectorClass::Active;
        else if (value == "gated") cfg.detector_class = DetectorClass::Gated;
        else return bad_value();
        return std::nullopt;
    }
    if (key == "detector.topology") {
        if (value == "four-detector") cfg.four_detector = true;
        else if (value == "two-detector") cfg.four_detector = false;
        else return bad_value();
        return std::nullopt;
    }

    if (key == "passive.v_excess") return set_d(cfg.passive.v_excess);
    if (key == "passive.tau_ns") return set_d(cfg.passive.tau_ns);
    if (key == "passive.f_armed") return set_d(cfg.passive.f_armed);
    if (key == "passive.eta") return set_d(cfg.passive.eta);
    if (key == "passive.dark_rate_hz") return set_d(cfg.passive.dark_rate_hz);
    if (key == "passive.p_hold_w") return set_d(cfg.passive.p_hold_w);
    if (key == "passive.p_damage_w") return set_d(cfg.passive.p_damage_w);

    if (key == "active.v_bias") return set_d(cfg.active.v_bias);
    if (key == "active.v_br0") return set_d(cfg.active.v_br0);
    if (key == "active.t0_k") return set_d(cfg.active.t0_k);
    if (key == "active.beta_v_per_k") return set_d(cfg.active.beta_v_per_k);
    if (key == "active.r_bias_ohm") return set_d(cfg.active.r_bias_ohm);
    if (key == "active.responsivity_a_per_w") return set_d(cfg.active.responsivity_a_per_w);
    if (key == "active.p_0_w") return set_d(cfg.active.p_0_w);
    if (key == "active.p_100_w") return set_d(cfg.active.p_100_w);
    if (key == "active.eta") return set_d(cfg.active.eta);
    if (key == "active.dark_rate_hz") return set_d(cfg.active.dark_rate_hz);
    if (key == "active.dead_time_ns") return set_ns(cfg.active.dead_time_ns);
    if (key == "active.p_sat_w") return set_d(cfg.active.p_sat_w);
    if (key == "active.sag_recovery_ns") return set_ns(cfg.active.sag_recovery_ns);
    if (key == "active.ac_coupling_ns") return set_ns(cfg.active.ac_coupling_ns);
    if (key == "active.tec_max_w") return set_d(cfg.active.tec_max_w);
    if (key == "active.c_th_j_per_k") return set_d(cfg.active.c_th_j_per_k);
    if (key == "active.leak_w_per_k") return set_d(cfg.active.leak_w_per_k);
    if (key == "active.heat_per_watt") return set_d(cfg.active.heat_per_watt);
    if (key == "active.p_damage_w") return set_d(cfg.active.p_damage_w);

    if (key == "gated.gate_period_ns") return set_ns(cfg.gated.gate_period_ns);
    if (key == "gated.gate_width_ns") return set_ns(cfg.gated.gate_width_ns);
    if (key == "gated.gate_offset_ns") return set_ns(cfg.gated.gate_offset_ns);
    if (key == "gated.after_gate_window_ns") return set_ns(cfg.gated.after_gate_window_ns);
    if (key == "gated.dc_undervoltage_v") return set_d(cfg.gated.dc_undervoltage_v);
    if (key == "gated.gate_overbias_v") return set_d(cfg.gated.gate_overbias_v);
    if (key == "gated.r_bias_ohm") return set_d(cfg.gated.r_bias_ohm);
    if (key == "gated.responsivity_a_per_w") return set_d(cfg.gated.responsivity_a_per_w);
    if (key == "gated.p_0_w") return set_d(cfg.gated.p_0_w);
    if (key == "gated.p_100_w") return set_d(cfg.gated.p_100_w);
    if (key == "gated.eta") return set_d(cfg.gated.eta);
    if (key == "gated.dark_rate_hz") return set_d(cfg.gated.dark_rate_hz);
    if (key == "gated.p_sat_w") return set_d(cfg.gated.p_sat_w);
    if (key == "gated.sag_recovery_ns") return set_ns(cfg.gated.sag_recovery_ns);
    if (key == "gated.ac_coupling_ns") return set_ns(cfg.gated.ac_coupling_ns);
    if (key == "gated.p_damage_w") return set_d(cfg.gated.p_damage_w);

    if (key == "alice.mu") return set_d(cfg.alice.mu);
    if (key == "alice.channel_loss_db") return set_d(cfg.alice.channel_loss_db);
    if (key == "alice.pulse_offset_ns") return set_ns(cfg.alice.pulse_offset_ns);
    if (key == "alice.pulse_width_ns") return set_ns(cfg.alice.pulse_width_ns);

    const auto parse_strategy = [](const std::string& v) -> std::optional<EveVariant> {
        if (v == "none") return EveVariant::None;
        if (v == "intercept-resend") return EveVariant::InterceptResendOnly;
        if (v == "passive-blind") return EveVariant::PassiveBlind;
        if (v == "active-blind-cw") return EveVariant::ActiveBlindCW;
        if (v == "active-blind-pulsed") return EveVariant::ActiveBlindPulsed;
        if (v == "thermal-blind") return EveVariant::ThermalBlind;
        if (v == "after-gate") return EveVariant::AfterGate;
        if (v == "power-compensated") return EveVariant::PowerCompensated;
        return std::nullopt;
    };
    if (key == "eve.strategy") {
        if (auto v = parse_strategy(value)) {
            cfg.eve.variant = *v;
            return std::nullopt;
        }
        return bad_value();
    }
    if (key == "eve.base_strategy") {
        if (auto v = parse_strategy(value)) {
            cfg.eve.base = *v;
            return std::nullopt;
        }
        return bad_value();
    }
    if (key == "eve.p_cw_w") return set_d(cfg.eve.p_cw_w);
    if (key == "eve.p_fake_w") return set_d(cfg.eve.p_fake_w);
    if (key == "eve.blank_ns") return set_ns(cfg.eve.blank_ns);
    if (key == "eve.fake_pulse_width_ns") return set_ns(cfg.eve.fake_pulse_width_ns);
    if (key == "eve.fake_pulse_offset_ns") return set_ns(cfg.eve.fake_pulse_offset_ns);
    if (key == "eve.pulse_rate_hz") return set_d(cfg.eve.pulse_rate_hz);
    if (key == "eve.carrier_pulse_width_ns") return set_ns(cfg.eve.carrier_pulse_width_ns);
    if (key == "eve.pulse_energy_j") return set_d(cfg.eve.pulse_energy_j);
    if (key == "eve.compensation_db") return set_d(cfg.eve.compensation_db);
    if (key == "eve.eta") return set_d(cfg.eve.eta_eve);
    if (key == "eve.resend_mu") return set_d(cfg.eve.resend_mu);
    if (key == "eve.knowledge_error") return set_d(cfg.eve.knowledge_error);

    if (key == "bob.voa_mode") {
        if (value == "fixed") cfg.voa.mode = VoaMode::Fixed;
        else if (value == "iid") cfg.voa.mode = VoaMode::IidUniform;
        else if (value == "frequency-scan") cfg.voa.mode = VoaMode::FrequencyScan;
        else return bad_value();
        return std::nullopt;
    }
    if (key == "bob.voa_fixed_db") return set_d(cfg.voa.fixed_db);
    if (key == "bob.voa_levels") {
        if (auto v = parse_double_list(value)) {
            cfg.voa.levels = *v;
            return std::nullopt;
        }
        return bad_value();
    }
    if (key == "bob.voa_pattern") {
        if (auto v = parse_double_list(value)) {
            cfg.voa.pattern = *v;
            return std::nullopt;
        }
        return bad_value();
    }
    if (key == "bob.voa_phase") return set_u64(cfg.voa.pattern_phase);
    if (key == "bob.voa_max_db") return set_d(cfg.voa.max_db);
    if (key == "bob.alpha") return set_d(cfg.alpha);

    return "unknown key '" + key + "'";
}

struct ConfigError {
    std::string message;
    int line = 0;
};

/// Parse a scenario file. Throws nothing; returns the config or the first
/// error (named key and line).
inline std::optional<ScenarioConfig> load_config(std::istream& in, ConfigError& err)
{
    ScenarioConfig cfg;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = config_detail::trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                err = {"malformed section header '" + line + "'", line_no};
                return std::nullopt;
            }
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            err = {"expected 'key = value', got '" + line + "'", line_no};
            return std::nullopt;
        }
        const std::string key = config_detail::trim(line.substr(0, eq));
        const std::string value = config_detail::trim(line.substr(eq + 1));
        const std::string full_key = section.empty() ? key : section + "." + key;
        if (auto e = config_set(cfg, full_key, value)) {
            err = {*e, line_no};
            return std::nullopt;
        }
    }
    return cfg;
}

inline std::optional<ScenarioConfig> load_config_file(const std::string& path, ConfigError& err)
{
    std::ifstream in(path);
    if (!in) {
        err = {"cannot open config file '" + path + "'", 0};
        return std::nullopt;
    }
    return load_config(in, err);
}

} // namespace blindsim
