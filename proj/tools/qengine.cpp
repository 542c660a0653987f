#include <CLI11.hpp>

#include <iostream>

#include "qengine/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Two-ion entangled quantum engine simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    int workers = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "Dotted key = value configuration file");
    app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
    app.add_option("--workers", workers, "Worker threads for sweeps and basis construction")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "Seed for fit.inject_noise_sigma");

    auto* run_cycle = app.add_subcommand("run-cycle", "Run one four-stroke cycle and write its time series");
    auto* sweep = app.add_subcommand("sweep", "Sweep the MS gate time");
    auto* fit = app.add_subcommand("fit", "Fit phonon populations to a blue-sideband signal");
    auto* audit = app.add_subcommand("audit-truncation", "Re-run a cycle with larger Fock truncations");

    CLI11_PARSE(app, argc, argv);

    try {
        qengine::CommandContext ctx;
        ctx.cfg = config_path.empty() ? qengine::parse_config_text("", "<defaults>", qengine::process_env())
                                      : qengine::parse_config(config_path);
        if (!out_dir.empty()) ctx.cfg.output.directory = out_dir;
        if (workers > 0) ctx.cfg.workers = workers;
        if (*seed_opt) ctx.seed = seed;

        if (*run_cycle) return qengine::cmd_run_cycle(ctx);
        if (*sweep) return qengine::cmd_sweep(ctx);
        if (*fit) return qengine::cmd_fit(ctx);
        if (*audit) return qengine::cmd_audit_truncation(ctx);
    } catch (const std::exception& e) {
        std::cerr << "qengine: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
