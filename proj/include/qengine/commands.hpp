#pragma once

// Batch commands behind the `qengine` executable. Each command writes its
// tables plus `effective_config.txt` into the output directory and returns a
// process exit code.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "qengine/config.hpp"
#include "qengine/csv.hpp"
#include "qengine/engine.hpp"
#include "qengine/sideband.hpp"

#ifndef QENGINE_VERSION
#define QENGINE_VERSION "0.1.0"
#endif
#ifndef QENGINE_REVISION
#define QENGINE_REVISION "unknown"
#endif

namespace qengine {

inline constexpr const char* kGeneratedPrefix = "generated=";

struct CommandContext {
    RunConfig cfg;
    std::optional<std::uint64_t> seed;
    std::ostream* log = &std::cerr;
};

namespace detail {

inline std::vector<std::string> provenance(const RunConfig& cfg, const std::string& status = "ok") {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return {std::string("tool=qengine version=") + QENGINE_VERSION + " revision=" + QENGINE_REVISION +
                " config_hash=" + config_hash(cfg),
            std::string("status=") + status, std::string(kGeneratedPrefix) + stamp};
}

inline std::filesystem::path prepare_output(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.output.directory);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "effective_config.txt") << effective_config_text(cfg);
    return dir;
}

inline double or_nan(const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> c{"t_gate_us", "tau3_us", "delta_n_o", "delta_n_t", "eta_c",
                                            "W_exact",   "W_diag",  "eta_m",     "eta_m_exact", "P_SS_final"};
    return c;
}

inline std::vector<double> summary_row(const CycleRecord& r) {
    return {r.t_gate, r.tau3, r.delta_n_o, r.delta_n_t, or_nan(r.eta_c), r.w_exact, r.w_diag, or_nan(r.eta_m),
            or_nan(r.eta_m_exact), r.end_of_stroke[3] ? r.end_of_stroke[3]->p_ss : std::numeric_limits<double>::quiet_NaN()};
}

}  // namespace detail

/// Drops the timestamp provenance line so outputs can be compared byte for byte.
inline std::string strip_timestamp(const std::string& csv_text) {
    std::string out, line;
    std::stringstream in(csv_text);
    while (std::getline(in, line))
        if (line.rfind(std::string("# ") + kGeneratedPrefix, 0) != 0) out += line + "\n";
    return out;
}

/// cycle_timeseries.csv and cycle_summary.csv.
inline int cmd_run_cycle(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto dir = detail::prepare_output(cfg);
    const double t_gate = cfg.cycle.t_gate_us ? *cfg.cycle.t_gate_us : cfg.engine.gate_time();
    CycleRecord rec;
    try {
        rec = run_cycle(cfg.engine, t_gate, cfg.cycle.tau3_us, {cfg.output.stride, false});
    } catch (const std::exception& e) {
        ResultTable failed{detail::provenance(cfg, std::string("FAILED ") + e.what()), detail::summary_columns(), {}};
        write_csv((dir / "cycle_summary.csv").string(), failed);
        *ctx.log << "run-cycle failed: " << e.what() << "\n";
        return 2;
    }

    ResultTable series{detail::provenance(cfg),
                       {"stroke", "t_us", "P_SS", "P_SDplusDS", "P_DD", "n_b", "n_c", "concurrence", "ms_fidelity"},
                       {}};
    for (const auto& s : rec.strokes)
        for (const auto& r : s.rows)
            series.rows.push_back({static_cast<double>(s.id), r.t, r.p_ss, r.p_single, r.p_dd, r.n_b, r.n_c,
                                   r.concurrence, r.ms_fidelity});
    write_csv((dir / "cycle_timeseries.csv").string(), series);

    ResultTable summary{detail::provenance(cfg), detail::summary_columns(), {detail::summary_row(rec)}};
    write_csv((dir / "cycle_summary.csv").string(), summary);
    *ctx.log << "run-cycle: delta_n_o=" << rec.delta_n_o << " delta_n_t=" << rec.delta_n_t
             << " eta_c=" << detail::or_nan(rec.eta_c) << " W_diag=" << rec.w_diag
             << " eta_m=" << detail::or_nan(rec.eta_m) << "\n";
    return 0;
}

inline const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> c{
        "t_gate_us", "ok",          "tau3_us",     "delta_n_o", "delta_n_t", "eta_c",   "W_exact",
        "W_diag",    "eta_m",       "eta_m_exact", "concurrence", "ms_fidelity", "P_SS_1", "P_SDplusDS_1",
        "P_DD_1",    "n_c_1",       "n_c_3",       "P_SS_final"};
    return c;
}

/// sweep.csv: one row per gate time; failed points carry ok=0 and NaNs.
inline int cmd_sweep(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto dir = detail::prepare_output(cfg);
    const auto grid = default_gate_grid(cfg.sweep.grid_start_us, cfg.sweep.grid_stop_us, cfg.sweep.grid_step_us);
    SweepOptions opt;
    opt.policy = cfg.sweep.tau3_policy;
    opt.tau3 = cfg.sweep.tau3_us;
    opt.scan = cfg.sweep.scan;
    opt.workers = cfg.workers;
    opt.cycle.record_stride = cfg.output.stride;
    const auto points = sweep_gate_time(cfg.engine, grid, opt);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    ResultTable t{detail::provenance(cfg), sweep_columns(), {}};
    int failures = 0;
    for (const auto& pt : points) {
        if (!pt.record) {
            ++failures;
            std::vector<double> row(sweep_columns().size(), nan);
            row[0] = pt.t_gate;
            row[1] = 0;
            t.rows.push_back(std::move(row));
            *ctx.log << "sweep point t_gate=" << pt.t_gate << " failed: " << pt.error << "\n";
            continue;
        }
        const auto& r = *pt.record;
        const auto& s1 = *r.end_of_stroke[0];
        t.rows.push_back({pt.t_gate, 1, pt.tau3, r.delta_n_o, r.delta_n_t, detail::or_nan(r.eta_c), r.w_exact, r.w_diag,
                          detail::or_nan(r.eta_m), detail::or_nan(r.eta_m_exact), s1.concurrence, s1.ms_fidelity,
                          s1.p_ss, s1.p_single, s1.p_dd, s1.n_c, r.end_of_stroke[2]->n_c, r.end_of_stroke[3]->p_ss});
    }
    write_csv((dir / "sweep.csv").string(), t);
    *ctx.log << "sweep: " << points.size() << " points, " << failures << " failed\n";
    return failures ? 3 : 0;
}

/// fit_populations.csv (n, P_n) and fit_summary.csv from an input table with columns t_us, signal.
inline int cmd_fit(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.fit.input_path.empty()) throw Error(ErrorCode::Config, "fit.input_path is required for fit");
    const auto input = read_csv(cfg.fit.input_path);
    const auto times = input.values("t_us");
    auto signal = input.values("signal");
    if (cfg.fit.inject_noise_sigma) {
        std::mt19937_64 rng(ctx.seed.value_or(0));
        std::normal_distribution<double> noise(0.0, *cfg.fit.inject_noise_sigma);
        for (auto& s : signal) s += noise(rng);
    }
    const auto dir = detail::prepare_output(cfg);
    ResponseOptions ro;
    ro.dt = cfg.fit.dt_us;
    ro.workers = cfg.workers;
    const auto basis = response_curves(cfg.fit.nmax, times, cfg.engine, ro);
    FitOptions fo;
    fo.tikhonov = cfg.fit.tikhonov;
    fo.noise_sigma = cfg.fit.noise_sigma;
    const auto fit = fit_populations(signal, basis, fo);

    ResultTable pops{detail::provenance(cfg), {"n", "P_n"}, {}};
    for (int n = 0; n <= fit.nmax; ++n)
        pops.rows.push_back({static_cast<double>(n), fit.dist[static_cast<std::size_t>(n)]});
    write_csv((dir / "fit_populations.csv").string(), pops);

    ResultTable summary{detail::provenance(cfg),
                        {"nmax", "residual_rms", "W_diag", "mean_n", "condition", "reduced_chi2"},
                        {{static_cast<double>(fit.nmax), fit.residual, ergotropy_diagonal(fit.dist), fit.dist.mean(),
                          fit.condition, detail::or_nan(fit.reduced_chi2)}}};
    write_csv((dir / "fit_summary.csv").string(), summary);
    *ctx.log << "fit: residual=" << fit.residual << " W_diag=" << ergotropy_diagonal(fit.dist) << "\n";
    return 0;
}

/// audit.csv: rows base / enlarged / |drift| for every summary scalar; exit 4 if any drift >= 1e-4.
inline int cmd_audit_truncation(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto dir = detail::prepare_output(cfg);
    const double t_gate = cfg.cycle.t_gate_us ? *cfg.cycle.t_gate_us : cfg.engine.gate_time();
    const auto drift = audit_truncation(cfg.engine, t_gate, cfg.cycle.tau3_us, cfg.audit.extra_levels);
    ResultTable t{detail::provenance(cfg), {"row"}, {{0}, {1}, {2}}};
    bool ok = true;
    for (const auto& d : drift) {
        t.columns.push_back(d.name);
        t.rows[0].push_back(d.base);
        t.rows[1].push_back(d.enlarged);
        t.rows[2].push_back(d.drift());
        if (!(d.drift() < 1e-4) && !(std::isnan(d.base) && std::isnan(d.enlarged))) ok = false;
        *ctx.log << d.name << ": " << d.base << " -> " << d.enlarged << " (drift " << d.drift() << ")\n";
    }
    write_csv((dir / "audit.csv").string(), t);
    return ok ? 0 : 4;
}

}  // namespace qengine
