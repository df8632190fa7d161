#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "blindsim/engine.hpp"

namespace blindsim {

using OrderedJson = nlohmann::ordered_json;

inline std::string basis_str(Basis b) { return b == Basis::Rectilinear ? "R" : "D"; }

inline std::string outcome_str(OutcomeKind k)
{
    switch (k) {
    case OutcomeKind::None: return "none";
    case OutcomeKind::Bit0: return "bit0";
    case OutcomeKind::Bit1: return "bit1";
    case OutcomeKind::Double: return "double";
    case OutcomeKind::Multi: return "multi";
    }
    return "?";
}

namespace io_detail {

inline std::string format_db(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline std::string join_ids(const std::vector<std::string>& ids)
{
    if (ids.empty())
        return "-";
    std::string out = ids.front();
    for (std::size_t i = 1; i < ids.size(); ++i)
        out += "+" + ids[i];
    return out;
}

} // namespace io_detail

/// Fixed-schema per-slot ledger (UTF-8, comma separated, LF line endings).
inline void write_slots_csv(const ScenarioReport& report, std::ostream& out)
{
    out << "slot,alice_bit,alice_basis,eve_basis,eve_bit,eve_abstain,bob_basis,voa_db,"
           "outcome,detector,click_time_ns\n";
    for (const auto& r : report.slots) {
        out << r.slot << ',' << r.alice_bit << ',' << basis_str(r.alice_basis) << ',';
        if (r.eve_present)
            out << basis_str(r.eve_basis) << ',' << r.eve_bit << ','
                << (r.eve_abstain ? 1 : 0) << ',';
        else
            out << "-,-,-,";
        out << (r.bob_basis ? basis_str(*r.bob_basis) : "-") << ','
            << io_detail::format_db(r.voa_db) << ',' << outcome_str(r.outcome) << ','
            << io_detail::join_ids(r.detectors) << ',' << r.click_time_ns << '\n';
    }
}

inline OrderedJson summary_json(const ScenarioReport& report)
{
    OrderedJson j;
    j["slots"] = report.stats.slot_count;
    j["click_slots"] = report.stats.click_slots;
    j["click_rate"] = report.click_rate();
    j["double_slots"] = report.stats.double_slots;
    j["multi_slots"] = report.stats.multi_slots;
    j["sifted_bits"] = report.stats.sifted_count;
    j["sifted_errors"] = report.stats.sifted_errors;
    if (auto q = report.qber())
        j["qber"] = *q;
    else
        j["qber"] = nullptr;
    if (auto c = report.eve_control())
        j["eve_control_fraction"] = *c;
    else
        j["eve_control_fraction"] = nullptr;
    OrderedJson levels = OrderedJson::array();
    auto per_level = report.stats.per_level;
    std::sort(per_level.begin(), per_level.end(),
              [](const LevelCounts& a, const LevelCounts& b) { return a.level_db < b.level_db; });
    for (const auto& lc : per_level) {
        OrderedJson lvl;
        lvl["voa_db"] = lc.level_db;
        lvl["slots"] = lc.slots;
        lvl["click_slots"] = lc.click_slots;
        lvl["click_rate"] =
            lc.slots == 0 ? 0.0
                          : static_cast<double>(lc.click_slots) / static_cast<double>(lc.slots);
        levels.push_back(lvl);
    }
    j["per_level"] = levels;
    OrderedJson det = OrderedJson::object();
    for (const auto& [id, clicks] : report.detector_clicks)
        det[id] = clicks;
    j["detector_clicks"] = det;
    OrderedJson damage = OrderedJson::array();
    for (const auto& [id, t] : report.damage_events)
        damage.push_back({{"detector", id}, {"time_ns", t}});
    j["damage_events"] = damage;
    j["thermally_blinded"] = report.thermally_blinded;
    j["thermal_blind_time_ns"] = report.thermal_blind_time_ns;
    return j;
}

inline OrderedJson verdict_json(const AttackVerdict& v)
{
    OrderedJson j;
    j["alarm"] = v.alarm;
    j["alpha"] = v.alpha;
    j["damage"] = v.damage;
    if (v.profile_available) {
        j["eq1_canonical"] = v.eq1_canonical;
        j["eq1_literal"] = v.eq1_literal;
        j["theta"] = v.thetas;
        j["controllable"] = v.controllable;
    } else {
        j["eq1_canonical"] = nullptr;
        j["eq1_literal"] = nullptr;
        j["theta"] = OrderedJson::array();
        j["controllable"] = nullptr;
    }
    const auto test_json = [](const TestResult& t) {
        OrderedJson tj;
        tj["applicable"] = t.applicable;
        tj["statistic"] = std::isfinite(t.statistic) ? OrderedJson(t.statistic)
                                                     : OrderedJson("inf");
        tj["p_value"] = t.p_value;
        tj["note"] = t.note;
        return tj;
    };
    j["scaling_test"] = test_json(v.scaling);
    j["double_click_test"] = test_json(v.double_clicks);
    return j;
}

/// FNV-1a 64-bit content digest (hex), used by the run manifest.
inline std::string fnv1a64_hex(const std::string& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct WrittenFile {
    std::string name;
    std::string digest;
};

/// Write one output file and record its digest.
inline WrittenFile write_output(const std::filesystem::path& dir, const std::string& name,
                                const std::string& content)
{
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    return {name, fnv1a64_hex(content)};
}

inline OrderedJson manifest_json(const std::string& config_path, std::uint64_t seed,
                                 const std::vector<WrittenFile>& files)
{
    OrderedJson j;
    j["config"] = config_path;
    j["seed"] = seed;
    OrderedJson outs = OrderedJson::array();
    for (const auto& f : files)
        outs.push_back({{"file", f.name}, {"fnv1a64", f.digest}});
    j["outputs"] = outs;
    return j;
}

} // namespace blindsim
