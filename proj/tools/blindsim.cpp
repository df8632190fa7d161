// Command line front end: run / calibrate / sweep.

#include <CLI11.hpp>

#include "blindsim/runner.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Deterministic receiver-side simulator for bright-light "
                 "detector-control attacks on a BB84 station"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario file")->required();
        sub->add_option("--seed", seed, "master seed (overrides engine.seed)");
        sub->add_option("--out", out_dir, "output directory");
    };

    CLI::App* run = app.add_subcommand("run", "run one scenario and write the slot ledger");
    add_common(run);

    CLI::App* cal = app.add_subcommand(
        "calibrate", "measure the blinded-detector threshold bands on a power grid");
    add_common(cal);
    std::string detector_id;
    std::string grid_spec = "1e-6:16e-6:64:10000";
    cal->add_option("--detector", detector_id, "detector id (default: all)");
    cal->add_option("--grid", grid_spec, "power grid min:max:points:trials (watts)");

    CLI::App* sweep = app.add_subcommand("sweep", "re-run the scenario over one config key");
    add_common(sweep);
    std::string param;
    std::vector<std::string> values;
    sweep->add_option("--param", param, "config key to vary, e.g. bob.voa_fixed_db")
        ->required();
    sweep->add_option("--values", values, "values to sweep")->required()->expected(-1);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return blindsim::cmd_run(config_path, seed, out_dir);
    if (cal->parsed()) {
        const auto grid = blindsim::GridSpec::parse(grid_spec);
        if (!grid) {
            std::cerr << "config error: bad --grid '" << grid_spec
                      << "' (expected min:max:points:trials)\n";
            return blindsim::kExitConfig;
        }
        return blindsim::cmd_calibrate(config_path, detector_id, *grid, seed, out_dir);
    }
    return blindsim::cmd_sweep(config_path, param, values, seed, out_dir);
}
