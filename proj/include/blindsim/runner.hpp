#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "blindsim/config.hpp"
#include "blindsim/report_io.hpp"

namespace blindsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;

namespace runner_detail {

inline std::string fmt_full(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::optional<ScenarioConfig> load_and_report(const std::string& config_path)
{
    ConfigError err;
    auto cfg = load_config_file(config_path, err);
    if (!cfg) {
        std::cerr << "config error: " << config_path << ":" << err.line << ": " << err.message
                  << "\n";
        return std::nullopt;
    }
    return cfg;
}

} // namespace runner_detail

/// `run` verb: execute one scenario and write slots.csv, summary.json,
/// verdict.json and manifest.json under `out_dir`.
inline int cmd_run(const std::string& config_path, std::uint64_t seed,
                   const std::filesystem::path& out_dir)
{
    auto cfg = runner_detail::load_and_report(config_path);
    if (!cfg)
        return kExitConfig;
    cfg->seed = seed;
    if (auto err = cfg->validate()) {
        std::cerr << "config error: " << *err << "\n";
        return kExitConfig;
    }
    const ScenarioReport report = run_scenario(*cfg);

    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    write_slots_csv(report, csv);
    std::vector<WrittenFile> files;
    files.push_back(write_output(out_dir, "slots.csv", csv.str()));
    files.push_back(write_output(out_dir, "summary.json", summary_json(report).dump(2) + "\n"));
    files.push_back(
        write_output(out_dir, "verdict.json", verdict_json(report.verdict).dump(2) + "\n"));
    const auto manifest = manifest_json(config_path, seed, files);
    write_output(out_dir, "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << (out_dir / "slots.csv").string() << " (+summary, verdict, manifest)"
              << (report.verdict.alarm ? " [ALARM]" : "") << "\n";
    return kExitOk;
}

struct GridSpec {
    double min_w = 1e-6;
    double max_w = 16e-6;
    std::size_t points = 64;
    std::size_t trials = 10000;

    /// Parse "min:max:points:trials".
    static std::optional<GridSpec> parse(const std::string& s)
    {
        GridSpec g;
        std::stringstream ss(s);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, ':'))
            parts.push_back(part);
        if (parts.size() != 4)
            return std::nullopt;
        const auto min = config_detail::parse_double(parts[0]);
        const auto max = config_detail::parse_double(parts[1]);
        const auto pts = config_detail::parse_int(parts[2]);
        const auto tr = config_detail::parse_int(parts[3]);
        if (!min || !max || !pts || !tr || *min <= 0.0 || *max <= *min || *pts < 2 || *tr < 1)
            return std::nullopt;
        g.min_w = *min;
        g.max_w = *max;
        g.points = static_cast<std::size_t>(*pts);
        g.trials = static_cast<std::size_t>(*tr);
        return g;
    }

    std::vector<double> powers() const
    {
        std::vector<double> out;
        for (std::size_t i = 0; i < points; ++i)
            out.push_back(min_w + (max_w - min_w) * static_cast<double>(i) /
                                      static_cast<double>(points - 1));
        return out;
    }
};

namespace runner_detail {

/// One characterization trial against the real detector step functions,
/// with the detector pre-driven into its blinded/linear condition.
inline bool active_blinded_trial(const ScenarioConfig& cfg, double power_w, SlotRng& rng)
{
    ActiveQuenchState st = make_active_state(cfg.active);
    DetectorLog log;
    const double carrier = std::max(cfg.eve.p_cw_w, 2.0 * blinding_power(cfg.active, st.temperature_k));
    // settle the comparator baseline on the carrier, then pulse
    active_step(st, cfg.active, {0, 1000, false, carrier, 0.0, 0.0}, rng, log);
    const std::size_t before = log.clicks.size();
    active_step(st, cfg.active, {1000, 50, false, carrier + power_w, 0.0, 0.0}, rng, log);
    return log.clicks.size() > before;
}

inline bool gated_after_gate_trial(const ScenarioConfig& cfg, std::size_t index, double power_w,
                                   SlotRng& rng)
{
    GatedState st;
    DetectorLog log;
    const Nanoseconds gate_end = cfg.gated.gate_offset_ns + cfg.gated.gate_width_ns;
    const Nanoseconds t = gate_end + static_cast<Nanoseconds>(index);
    gated_step(st, cfg.gated, {t, 1, false, 0.0, power_w, 0.0}, 0, rng, log);
    return !log.clicks.empty();
}

} // namespace runner_detail

/// `calibrate` verb: sweep the power grid against the configured detector(s)
/// and write thresholds.csv plus theta.json (both controllability readings).
inline int cmd_calibrate(const std::string& config_path, const std::string& detector_id,
                         const GridSpec& grid, std::uint64_t seed,
                         const std::filesystem::path& out_dir)
{
    auto cfg = runner_detail::load_and_report(config_path);
    if (!cfg)
        return kExitConfig;
    cfg->seed = seed;
    if (auto err = cfg->validate()) {
        std::cerr << "config error: " << *err << "\n";
        return kExitConfig;
    }
    if (cfg->detector_class == DetectorClass::Passive) {
        std::cerr << "config error: the passive circuit has no linear-mode band to calibrate\n";
        return kExitConfig;
    }
    std::vector<std::string> ids;
    {
        DetectorBank bank(cfg->detector_class, cfg->four_detector, cfg->passive, cfg->active,
                          cfg->gated);
        for (std::size_t i = 0; i < bank.size(); ++i)
            if (detector_id.empty() || bank.channel(i).id == detector_id)
                ids.push_back(bank.channel(i).id);
    }
    if (ids.empty()) {
        std::cerr << "config error: unknown detector id '" << detector_id << "'\n";
        return kExitConfig;
    }

    const bool gated = cfg->detector_class == DetectorClass::Gated;
    const std::size_t index_count =
        gated ? static_cast<std::size_t>(cfg->gated.after_gate_window_ns) : 1;
    const auto powers = grid.powers();

    ThresholdProfile measured;
    std::vector<std::string> unbracketed;
    std::vector<std::string> not_linear;
    std::ostringstream csv;
    csv << "detector,index,p_0_w,p_100_w\n";
    for (std::size_t d = 0; d < ids.size(); ++d) {
        SlotRng rng(cfg->seed, Stream::DetectorNoise, 1000000 + d);
        const auto trial = [&](std::size_t index, double power, SlotRng& r) {
            return gated ? runner_detail::gated_after_gate_trial(*cfg, index, power, r)
                         : runner_detail::active_blinded_trial(*cfg, power, r);
        };
        const auto result =
            characterize_thresholds(trial, index_count, powers, grid.trials, rng);
        std::vector<ThresholdBand> bands;
        for (std::size_t i = 0; i < result.indices.size(); ++i) {
            const auto& idx = result.indices[i];
            csv << ids[d] << ',' << i << ',' << runner_detail::fmt_full(idx.band.p_0) << ',';
            if (idx.bracketed)
                csv << runner_detail::fmt_full(idx.band.p_100);
            else
                csv << "nan";
            csv << '\n';
            bands.push_back(idx.band);
            if (!idx.bracketed && std::find(unbracketed.begin(), unbracketed.end(), ids[d]) ==
                                      unbracketed.end())
                unbracketed.push_back(ids[d]);
            if (!idx.in_linear_mode && std::find(not_linear.begin(), not_linear.end(), ids[d]) ==
                                           not_linear.end())
                not_linear.push_back(ids[d]);
        }
        measured.detectors[ids[d]] = std::move(bands);
    }

    OrderedJson tj;
    OrderedJson thetas = OrderedJson::array();
    bool controllable = unbracketed.empty() && index_count > 0;
    for (std::size_t t = 0; t < index_count; ++t) {
        const ThetaResult th = theta(measured, t);
        thetas.push_back(th.degenerate ? OrderedJson(nullptr) : OrderedJson(th.value));
        controllable = controllable && th.controllable;
    }
    tj["theta"] = thetas;
    tj["controllable"] = controllable;
    tj["eq1_canonical"] = unbracketed.empty() ? OrderedJson(eq1_predicate(measured))
                                              : OrderedJson(nullptr);
    tj["eq1_literal"] = unbracketed.empty() ? OrderedJson(eq1_literal(measured))
                                            : OrderedJson(nullptr);
    tj["unbracketed"] = unbracketed;
    tj["not_in_linear_mode"] = not_linear;

    std::filesystem::create_directories(out_dir);
    write_output(out_dir, "thresholds.csv", csv.str());
    write_output(out_dir, "theta.json", tj.dump(2) + "\n");
    if (!unbracketed.empty()) {
        std::cerr << "calibration: threshold band not bracketed for:";
        for (const auto& id : unbracketed)
            std::cerr << ' ' << id;
        std::cerr << "\n";
        return kExitError;
    }
    return kExitOk;
}

/// `sweep` verb: re-run the scenario for every value of one config key and
/// emit a long-format sweep.csv (parameter,value,metric,metric_value).
/// Values run in parallel, bounded by BLINDSIM_THREADS; output order follows
/// the value list.
inline int cmd_sweep(const std::string& config_path, const std::string& param,
                     const std::vector<std::string>& values, std::uint64_t seed,
                     const std::filesystem::path& out_dir)
{
    if (values.empty()) {
        std::cerr << "config error: empty sweep value list\n";
        return kExitConfig;
    }
    auto base = runner_detail::load_and_report(config_path);
    if (!base)
        return kExitConfig;
    base->seed = seed;

    std::vector<ScenarioConfig> configs;
    for (const auto& v : values) {
        ScenarioConfig cfg = *base;
        if (auto err = config_set(cfg, param, v)) {
            std::cerr << "config error: " << *err << "\n";
            return kExitConfig;
        }
        if (auto err = cfg.validate()) {
            std::cerr << "config error: " << param << "=" << v << ": " << *err << "\n";
            return kExitConfig;
        }
        configs.push_back(std::move(cfg));
    }

    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BLINDSIM_THREADS")) {
        if (const auto n = config_detail::parse_int(env); n && *n >= 1)
            threads = static_cast<unsigned>(*n);
    }
    threads = std::min<unsigned>(threads, static_cast<unsigned>(configs.size()));

    std::vector<ScenarioReport> reports(configs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size())
                return;
            reports[i] = run_scenario(configs[i]);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t + 1 < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    std::ostringstream csv;
    csv << "parameter,value,metric,metric_value\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& rep = reports[i];
        const auto row = [&](const std::string& metric, double value) {
            csv << param << ',' << values[i] << ',' << metric << ','
                << runner_detail::fmt_full(value) << '\n';
        };
        row("click_rate", rep.click_rate());
        row("double_rate", rep.stats.slot_count == 0
                               ? 0.0
                               : static_cast<double>(rep.stats.double_slots +
                                                     rep.stats.multi_slots) /
                                     static_cast<double>(rep.stats.slot_count));
        row("qber", rep.qber().value_or(-1.0));
        row("eve_control", rep.eve_control().value_or(-1.0));
        row("sifted_bits", static_cast<double>(rep.stats.sifted_count));
        row("alarm", rep.verdict.alarm ? 1.0 : 0.0);
        row("scaling_p", rep.verdict.scaling.applicable ? rep.verdict.scaling.p_value : -1.0);
        row("damage_events", static_cast<double>(rep.stats.damage_events));
        row("thermally_blinded", rep.thermally_blinded ? 1.0 : 0.0);
    }
    std::filesystem::create_directories(out_dir);
    write_output(out_dir, "sweep.csv", csv.str());
    return kExitOk;
}

} // namespace blindsim
