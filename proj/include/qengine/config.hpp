#pragma once

// Flat dotted-key run configuration:
//
//   # comment
//   engine.eta_p = 0.0574
//   cycle.tau3_us = 26.5
//
// Every key is optional; defaults reproduce the reference parameter set.
// Environment variables QENGINE_<KEY> (dots become underscores, upper case)
// override file values, e.g. QENGINE_ENGINE_ETA_P.

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "qengine/csv.hpp"
#include "qengine/engine.hpp"

namespace qengine {

struct RunConfig {
    EngineParams engine;

    struct Cycle {
        std::optional<double> t_gate_us;  // default: closed-loop gate time
        double tau3_us = 26.5;
    } cycle;

    struct Sweep {
        double grid_start_us = 4.0;
        double grid_stop_us = 72.0;
        double grid_step_us = 4.0;
        Tau3Policy tau3_policy = Tau3Policy::Fixed;
        std::optional<double> tau3_us;  // default: optimized at the closed-loop gate time
        ScanWindow scan{};
    } sweep;

    struct Fit {
        std::string input_path;
        int nmax = 6;
        double tikhonov = 0.0;
        std::optional<double> noise_sigma;         // reported chi^2 uses it
        std::optional<double> inject_noise_sigma;  // adds seeded Gaussian noise before fitting
        double dt_us = 0.02;
    } fit;

    struct Audit {
        int extra_levels = 4;
    } audit;

    struct Output {
        std::string directory = "out";
        int stride = 10;
    } output;

    int workers = 1;
};

namespace detail {

inline double to_double(const std::string& v, const std::string& where) {
    try {
        return parse_real(v, where);
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, std::string(e.what()).substr(std::strlen(to_string(e.code())) + 2));
    }
}

inline int to_int(const std::string& v, const std::string& where) {
    const double d = to_double(v, where);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw Error(ErrorCode::Config, where + ": '" + v + "' is not an integer");
    return static_cast<int>(d);
}

inline bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(ErrorCode::Config, where + ": '" + v + "' is not a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeySpec {
    Setter set;
    Getter get;
};

inline std::string opt_str(const std::optional<double>& v) { return v ? format_real(*v) : "default"; }

inline const std::map<std::string, KeySpec>& config_keys() {
    // "default" is accepted for optional values and restores the derived default
    static const std::map<std::string, KeySpec> keys = [] {
        std::map<std::string, KeySpec> k;
        auto add_real = [&](const std::string& name, std::function<double&(RunConfig&)> ref) {
            k[name] = {[ref](RunConfig& c, const std::string& v, const std::string& w) { ref(c) = to_double(v, w); },
                       [ref](const RunConfig& c) { return format_real(ref(const_cast<RunConfig&>(c))); }};
        };
        auto add_int = [&](const std::string& name, std::function<int&(RunConfig&)> ref) {
            k[name] = {[ref](RunConfig& c, const std::string& v, const std::string& w) { ref(c) = to_int(v, w); },
                       [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
        };
        auto add_opt = [&](const std::string& name, std::function<std::optional<double>&(RunConfig&)> ref) {
            k[name] = {[ref](RunConfig& c, const std::string& v, const std::string& w) {
                           if (v == "default")
                               ref(c).reset();
                           else
                               ref(c) = to_double(v, w);
                       },
                       [ref](const RunConfig& c) { return opt_str(ref(const_cast<RunConfig&>(c))); }};
        };

        add_real("engine.omega_khz", [](RunConfig& c) -> double& { return c.engine.omega_khz; });
        add_real("engine.eta_p", [](RunConfig& c) -> double& { return c.engine.eta_p; });
        add_real("engine.omega_b_mhz", [](RunConfig& c) -> double& { return c.engine.omega_b_mhz; });
        add_real("engine.omega_c_mhz", [](RunConfig& c) -> double& { return c.engine.omega_c_mhz; });
        add_opt("engine.delta_khz", [](RunConfig& c) -> std::optional<double>& { return c.engine.delta_khz; });
        add_opt("engine.gamma_eff", [](RunConfig& c) -> std::optional<double>& { return c.engine.gamma_eff; });
        add_real("engine.n_h", [](RunConfig& c) -> double& { return c.engine.n_h; });
        add_real("engine.n_c", [](RunConfig& c) -> double& { return c.engine.n_c; });
        add_int("engine.breath_levels", [](RunConfig& c) -> int& { return c.engine.breath_levels; });
        add_int("engine.com_levels", [](RunConfig& c) -> int& { return c.engine.com_levels; });
        add_real("engine.ramp_start_khz", [](RunConfig& c) -> double& { return c.engine.ramp_start_khz; });
        add_int("engine.ramp_down_steps", [](RunConfig& c) -> int& { return c.engine.ramp_down.steps; });
        add_real("engine.ramp_down_step_us", [](RunConfig& c) -> double& { return c.engine.ramp_down.step_us; });
        add_int("engine.ramp_up_steps", [](RunConfig& c) -> int& { return c.engine.ramp_up.steps; });
        add_real("engine.ramp_up_step_us", [](RunConfig& c) -> double& { return c.engine.ramp_up.step_us; });
        add_real("engine.dt_stroke1_us", [](RunConfig& c) -> double& { return c.engine.dt_stroke1; });
        add_real("engine.dt_stroke2_us", [](RunConfig& c) -> double& { return c.engine.dt_stroke2; });
        add_real("engine.dt_stroke3_us", [](RunConfig& c) -> double& { return c.engine.dt_stroke3; });
        add_real("engine.dt_stroke4_us", [](RunConfig& c) -> double& { return c.engine.dt_stroke4; });
        k["engine.full_space"] = {
            [](RunConfig& c, const std::string& v, const std::string& w) { c.engine.full_space = to_bool(v, w); },
            [](const RunConfig& c) { return std::string(c.engine.full_space ? "true" : "false"); }};

        add_opt("cycle.t_gate_us", [](RunConfig& c) -> std::optional<double>& { return c.cycle.t_gate_us; });
        add_real("cycle.tau3_us", [](RunConfig& c) -> double& { return c.cycle.tau3_us; });

        add_real("sweep.grid_start_us", [](RunConfig& c) -> double& { return c.sweep.grid_start_us; });
        add_real("sweep.grid_stop_us", [](RunConfig& c) -> double& { return c.sweep.grid_stop_us; });
        add_real("sweep.grid_step_us", [](RunConfig& c) -> double& { return c.sweep.grid_step_us; });
        k["sweep.tau3_policy"] = {
            [](RunConfig& c, const std::string& v, const std::string& w) {
                if (v == "fixed")
                    c.sweep.tau3_policy = Tau3Policy::Fixed;
                else if (v == "re-optimized" || v == "reoptimized")
                    c.sweep.tau3_policy = Tau3Policy::Reoptimized;
                else
                    throw Error(ErrorCode::Config, w + ": tau3_policy must be 'fixed' or 're-optimized'");
            },
            [](const RunConfig& c) {
                return std::string(c.sweep.tau3_policy == Tau3Policy::Fixed ? "fixed" : "re-optimized");
            }};
        add_opt("sweep.tau3_us", [](RunConfig& c) -> std::optional<double>& { return c.sweep.tau3_us; });
        add_real("sweep.scan_lo_us", [](RunConfig& c) -> double& { return c.sweep.scan.lo; });
        add_real("sweep.scan_hi_us", [](RunConfig& c) -> double& { return c.sweep.scan.hi; });
        add_real("sweep.scan_step_us", [](RunConfig& c) -> double& { return c.sweep.scan.step; });

        k["fit.input_path"] = {[](RunConfig& c, const std::string& v, const std::string&) { c.fit.input_path = v; },
                               [](const RunConfig& c) { return c.fit.input_path; }};
        add_int("fit.nmax", [](RunConfig& c) -> int& { return c.fit.nmax; });
        add_real("fit.tikhonov", [](RunConfig& c) -> double& { return c.fit.tikhonov; });
        add_opt("fit.noise_sigma", [](RunConfig& c) -> std::optional<double>& { return c.fit.noise_sigma; });
        add_opt("fit.inject_noise_sigma",
                [](RunConfig& c) -> std::optional<double>& { return c.fit.inject_noise_sigma; });
        add_real("fit.dt_us", [](RunConfig& c) -> double& { return c.fit.dt_us; });

        add_int("audit.extra_levels", [](RunConfig& c) -> int& { return c.audit.extra_levels; });

        k["output.directory"] = {[](RunConfig& c, const std::string& v, const std::string&) { c.output.directory = v; },
                                 [](const RunConfig& c) { return c.output.directory; }};
        add_int("output.stride", [](RunConfig& c) -> int& { return c.output.stride; });
        add_int("workers", [](RunConfig& c) -> int& { return c.workers; });
        return k;
    }();
    return keys;
}

inline std::string env_name(const std::string& key) {
    std::string out = "QENGINE_";
    for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

}  // namespace detail

/// Cross-field validation; `where` maps a key to its source location for messages.
inline void validate_config(const RunConfig& c, const std::map<std::string, std::string>& where = {}) {
    auto at = [&](const std::string& key) {
        auto it = where.find(key);
        return it == where.end() ? key : key + " (" + it->second + ")";
    };
    try {
        c.engine.validate();
    } catch (const Error& e) {
        // engine messages start with the field name
        std::string msg = e.what();
        const auto colon = msg.find(": ");
        const std::string body = colon == std::string::npos ? msg : msg.substr(colon + 2);
        const std::string field = body.substr(0, body.find(' '));
        std::string key = "engine." + field;
        if (field == "dt") key = "engine.dt_strokeN_us";
        if (field == "ramp_down" || field == "ramp_up") key = "engine." + field + "_steps";
        throw Error(ErrorCode::Config, at(key) + ": " + body.substr(body.find(' ') + 1));
    }
    if (c.cycle.t_gate_us && !(*c.cycle.t_gate_us >= 0)) throw Error(ErrorCode::Config, at("cycle.t_gate_us") + ": must be >= 0");
    if (!(c.cycle.tau3_us > 0)) throw Error(ErrorCode::Config, at("cycle.tau3_us") + ": must be > 0");
    if (!(c.sweep.grid_step_us > 0)) throw Error(ErrorCode::Config, at("sweep.grid_step_us") + ": must be > 0");
    if (!(c.sweep.grid_stop_us >= c.sweep.grid_start_us) || !(c.sweep.grid_start_us >= 0))
        throw Error(ErrorCode::Config, at("sweep.grid_stop_us") + ": grid must satisfy 0 <= start <= stop");
    if (c.sweep.tau3_us && !(*c.sweep.tau3_us > 0)) throw Error(ErrorCode::Config, at("sweep.tau3_us") + ": must be > 0");
    if (!(c.sweep.scan.lo > 0) || !(c.sweep.scan.step > 0) || c.sweep.scan.hi < c.sweep.scan.lo)
        throw Error(ErrorCode::Config, at("sweep.scan_lo_us") + ": scan window must be positive and non-empty");
    if (c.fit.nmax < 0) throw Error(ErrorCode::Config, at("fit.nmax") + ": must be >= 0");
    if (!(c.fit.tikhonov >= 0)) throw Error(ErrorCode::Config, at("fit.tikhonov") + ": must be >= 0");
    if (!(c.fit.dt_us > 0)) throw Error(ErrorCode::Config, at("fit.dt_us") + ": must be > 0");
    if (c.audit.extra_levels < 1) throw Error(ErrorCode::Config, at("audit.extra_levels") + ": must be >= 1");
    if (c.output.stride < 1) throw Error(ErrorCode::Config, at("output.stride") + ": must be >= 1");
    if (c.workers < 1) throw Error(ErrorCode::Config, at("workers") + ": must be >= 1");
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        return v ? std::optional<std::string>(v) : std::nullopt;
    };
}

inline EnvLookup no_env() {
    return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

/// Parses config text; `origin` names the source in error messages.
inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>",
                                   const EnvLookup& env = no_env()) {
    RunConfig cfg;
    const auto& keys = detail::config_keys();
    std::map<std::string, int> seen;
    std::map<std::string, std::string> where;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const auto s = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (s.empty()) continue;
        const std::string loc = origin + ":" + std::to_string(lineno);
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::Config, loc + ": expected 'key = value'");
        const auto key = detail::trim(s.substr(0, eq));
        const auto value = detail::trim(s.substr(eq + 1));
        auto it = keys.find(key);
        if (it == keys.end()) throw Error(ErrorCode::Config, loc + ": unknown key '" + key + "'");
        if (auto prev = seen.find(key); prev != seen.end())
            throw Error(ErrorCode::Config, loc + ": duplicate key '" + key + "' (first set on line " +
                                               std::to_string(prev->second) + ", again on line " +
                                               std::to_string(lineno) + ")");
        seen[key] = lineno;
        where[key] = loc;
        it->second.set(cfg, value, loc + ": " + key);
    }
    for (const auto& [key, spec] : keys) {
        const auto name = detail::env_name(key);
        if (auto v = env(name)) {
            spec.set(cfg, detail::trim(*v), "environment " + name);
            where[key] = "environment " + name;
        }
    }
    validate_config(cfg, where);
    return cfg;
}

inline RunConfig parse_config(const std::string& path, const EnvLookup& env = process_env()) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::Config, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path, env);
}

/// Every key with its effective value, one per line, sorted by key.
inline std::string effective_config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, spec] : detail::config_keys()) out += key + " = " + spec.get(cfg) + "\n";
    return out;
}

/// FNV-1a 64-bit, hex. The output directory is left out so identical runs hash alike wherever they write.
inline std::string config_hash(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.output.directory.clear();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : effective_config_text(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace qengine
