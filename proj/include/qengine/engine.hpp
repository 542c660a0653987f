#pragma once

// Four-stroke engine cycle on two ion qubits, the axial breath mode (used to
// entangle the qubits) and the axial centre-of-mass mode (the load).
//
//   stroke 1: bichromatic MS drive on the breath mode        (charging)
//   stroke 2: detuning ramp down to the COM red sideband      (0.4 us)
//   stroke 3: resonant COM red sideband (Tavis-Cummings)      (transfer)
//   stroke 4: detuning ramp up with qubit decay switched on   (reset)
//
// Units: time in us, angular frequencies in rad/us. Input frequencies are
// cyclic (kHz / MHz) as they are quoted experimentally.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qengine/dynamics.hpp"
#include "qengine/opalg.hpp"
#include "qengine/thermo.hpp"

namespace qengine {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Cyclic kHz to angular rad/us.
inline constexpr double khz_to_rad_per_us(double khz) { return kTwoPi * khz * 1e-3; }

struct RampSchedule {
    int steps = 4;
    double step_us = 0.1;
    double duration() const { return steps * step_us; }
};

struct EngineParams {
    double omega_khz = 245.8;     // Omega / 2pi
    double eta_p = 0.0574;        // Lamb-Dicke parameter
    double omega_b_mhz = 1.37;    // breath mode / 2pi
    double omega_c_mhz = 0.794;   // COM mode / 2pi
    std::optional<double> delta_khz;  // MS detuning / 2pi; default 2 eta_p Omega
    std::optional<double> gamma_eff;  // rad/us; default 5 Omega
    double n_h = 0.03;
    double n_c = 0.13;
    int breath_levels = 8;
    int com_levels = 12;
    double ramp_start_khz = 859.0;
    RampSchedule ramp_down{4, 0.1};
    RampSchedule ramp_up{5, 1.0};
    double dt_stroke1 = 0.02;
    double dt_stroke2 = 0.002;
    double dt_stroke3 = 0.02;
    double dt_stroke4 = 0.002;
    /// Propagate every stroke on the full four-slot space instead of the
    /// exact two-factor decomposition (same results, much slower).
    bool full_space = false;

    double omega() const { return khz_to_rad_per_us(omega_khz); }
    double delta() const { return delta_khz ? khz_to_rad_per_us(*delta_khz) : 2.0 * eta_p * omega(); }
    double delta_khz_value() const { return delta_khz ? *delta_khz : 2.0 * eta_p * omega_khz; }
    double gamma() const { return gamma_eff ? *gamma_eff : 5.0 * omega(); }
    /// Sideband coupling eta_p Omega / 2.
    double coupling() const { return 0.5 * eta_p * omega(); }
    /// Closed-loop MS gate time 2 pi / delta.
    double gate_time() const { return kTwoPi / delta(); }

    void validate() const {
        auto fail = [](const std::string& key, const std::string& why) {
            throw Error(ErrorCode::InvalidParameter, key + " " + why);
        };
        if (!(omega_khz > 0)) fail("omega_khz", "must be > 0");
        if (!(eta_p >= 0 && eta_p < 1)) fail("eta_p", "must lie in [0, 1)");
        if (!(omega_b_mhz > 0)) fail("omega_b_mhz", "must be > 0");
        if (!(omega_c_mhz > 0)) fail("omega_c_mhz", "must be > 0");
        if (delta_khz && !(*delta_khz > 0)) fail("delta_khz", "must be > 0");
        if (gamma_eff && !(*gamma_eff >= 0)) fail("gamma_eff", "must be >= 0");
        if (!(n_h >= 0)) fail("n_h", "must be >= 0");
        if (!(n_c >= 0)) fail("n_c", "must be >= 0");
        if (breath_levels < 4) fail("breath_levels", "must be >= 4");
        if (com_levels < 4) fail("com_levels", "must be >= 4");
        if (!(ramp_start_khz > 0)) fail("ramp_start_khz", "must be > 0");
        if (ramp_down.steps < 1 || !(ramp_down.step_us > 0)) fail("ramp_down", "needs >= 1 step of positive length");
        if (ramp_up.steps < 1 || !(ramp_up.step_us > 0)) fail("ramp_up", "needs >= 1 step of positive length");
        for (double dt : {dt_stroke1, dt_stroke2, dt_stroke3, dt_stroke4})
            if (!(dt > 0)) fail("dt", "must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Stroke Hamiltonians. Qubits occupy slots 0 and 1 of `layout`; `mode` is the
// slot of the phonon mode being driven. Other slots are spectators.

namespace detail {

struct SlotOps {
    Operator sx;     // sigma_x^1 + sigma_x^2
    Operator sp;     // sigma_+^1 + sigma_+^2
    Operator sm;     // sigma_-^1 + sigma_-^2
    Operator a, ad;  // mode ladder operators
};

inline SlotOps slot_ops(const SubsystemLayout& layout, std::size_t mode) {
    if (layout.slots() < 3 || layout.dim(0) != 2 || layout.dim(1) != 2)
        throw Error(ErrorCode::Layout, "engine layouts start with two qubit slots");
    const auto q = qubit_ops();
    const Operator sp = embed(q.sigma_plus, 0, layout) + embed(q.sigma_plus, 1, layout);
    const Operator sm = sp.dagger();
    const Operator a = embed(destroy(layout.dim(mode)), mode, layout);
    return {sp + sm, sp, sm, a, a.dagger()};
}

}  // namespace detail

/// Bichromatic MS drive on `mode`:
///   sum_i (eta Omega/2) [sigma_+^i e^{-i delta t} a + h.c.] + (eta Omega/2) [sigma_+^i e^{+i delta t} a^+ + h.c.]
/// With both sidebands at equal strength this collapses to
///   (eta Omega/2) S_x (a e^{-i delta t} + a^+ e^{+i delta t}),  S_x = sigma_x^1 + sigma_x^2.
inline ScheduledHamiltonian ms_hamiltonian(const EngineParams& p, const SubsystemLayout& layout, std::size_t mode,
                                           double duration) {
    const auto ops = detail::slot_ops(layout, mode);
    const double g = p.coupling();
    const double d = p.delta();
    ScheduledHamiltonian h(layout.total(), 0.0, duration);
    h.add(ops.sx * ops.a, [g, d](double t) { return g * std::exp(cplx(0.0, -d * t)); });
    h.add(ops.sx * ops.ad, [g, d](double t) { return g * std::exp(cplx(0.0, d * t)); });
    return h;
}

inline ScheduledHamiltonian build_ms_hamiltonian(const EngineParams& p) {
    const auto l = SubsystemLayout::engine(p.breath_levels, p.com_levels);
    return ms_hamiltonian(p, l, 2, p.gate_time());
}

enum class RampDirection { Down, Up };

/// Piecewise-constant detuning Delta(t) in rad/us and its integral phi(t).
///   down: Delta_k = start (1 - k/steps),   k = 0..steps-1  (reaches 0 at the end)
///   up:   Delta_k = start (k+1)/steps                      (reaches start at the end)
class DetuningRamp {
public:
    DetuningRamp(double start_rad_per_us, RampSchedule sched, RampDirection dir) : sched_(sched) {
        for (int k = 0; k < sched.steps; ++k) {
            const double frac = dir == RampDirection::Down ? 1.0 - static_cast<double>(k) / sched.steps
                                                           : static_cast<double>(k + 1) / sched.steps;
            levels_.push_back(start_rad_per_us * frac);
        }
    }

    double duration() const { return sched_.duration(); }
    const std::vector<double>& levels() const { return levels_; }

    double detuning(double t) const { return levels_[index(t)]; }

    double phase(double t) const {
        const std::size_t k = index(t);
        double phi = 0;
        for (std::size_t j = 0; j < k; ++j) phi += levels_[j] * sched_.step_us;
        return phi + levels_[k] * (t - static_cast<double>(k) * sched_.step_us);
    }

private:
    std::size_t index(double t) const {
        const double x = std::max(0.0, t) / sched_.step_us;
        const auto k = static_cast<std::size_t>(std::floor(x));
        return std::min(k, levels_.size() - 1);
    }

    RampSchedule sched_;
    std::vector<double> levels_;
};

/// sum_i (eta Omega/2) sigma_+^i (e^{-i phi(t)} a + e^{i phi(t)} a^+) + h.c., phi(t) = int_0^t Delta.
inline ScheduledHamiltonian ramp_hamiltonian(const EngineParams& p, const SubsystemLayout& layout, std::size_t mode,
                                             RampDirection dir) {
    const auto ops = detail::slot_ops(layout, mode);
    const double g = p.coupling();
    const DetuningRamp ramp(khz_to_rad_per_us(p.ramp_start_khz), dir == RampDirection::Down ? p.ramp_down : p.ramp_up,
                            dir);
    ScheduledHamiltonian h(layout.total(), 0.0, ramp.duration());
    // red and blue parts share phases pairwise with their conjugates, giving S_x (a e^{-i phi} + a^+ e^{i phi})
    h.add(ops.sx * ops.a, [g, ramp](double t) { return g * std::exp(cplx(0.0, -ramp.phase(t))); });
    h.add(ops.sx * ops.ad, [g, ramp](double t) { return g * std::exp(cplx(0.0, ramp.phase(t))); });
    return h;
}

inline ScheduledHamiltonian build_ramp_hamiltonian(const EngineParams& p, RampDirection dir) {
    return ramp_hamiltonian(p, SubsystemLayout::engine(p.breath_levels, p.com_levels), 3, dir);
}

/// Resonant red sideband: sum_i (eta Omega/2)(sigma_+^i a + sigma_-^i a^+).
inline ScheduledHamiltonian jc_hamiltonian(const EngineParams& p, const SubsystemLayout& layout, std::size_t mode,
                                           double duration) {
    const auto ops = detail::slot_ops(layout, mode);
    ScheduledHamiltonian h(layout.total(), 0.0, duration);
    h.add_constant(ops.sp * ops.a + ops.sm * ops.ad, p.coupling());
    return h;
}

inline ScheduledHamiltonian build_jc_hamiltonian(const EngineParams& p, double duration = 26.5) {
    return jc_hamiltonian(p, SubsystemLayout::engine(p.breath_levels, p.com_levels), 3, duration);
}

/// Resonant blue sideband: sum_i (eta Omega/2)(sigma_+^i a^+ + sigma_-^i a). `driven` masks ions.
inline ScheduledHamiltonian blue_sideband_hamiltonian(const EngineParams& p, const SubsystemLayout& layout,
                                                      std::size_t mode, double duration,
                                                      std::array<bool, 2> driven = {true, true}) {
    const auto q = qubit_ops();
    const Operator a = embed(destroy(layout.dim(mode)), mode, layout);
    Sparse zero(layout.total(), layout.total());
    Operator op(zero);
    for (std::size_t i = 0; i < 2; ++i) {
        if (!driven[i]) continue;
        const Operator sp = embed(q.sigma_plus, i, layout);
        op = op + sp * a.dagger() + sp.dagger() * a;
    }
    ScheduledHamiltonian h(layout.total(), 0.0, duration);
    h.add_constant(op, p.coupling());
    return h;
}

/// Total excitation sum_i sigma_+^i sigma_-^i + a^+ a on `mode`.
inline Operator excitation_number(const SubsystemLayout& layout, std::size_t mode) {
    const auto ops = detail::slot_ops(layout, mode);
    const auto q = qubit_ops();
    return embed(q.projector_D, 0, layout) + embed(q.projector_D, 1, layout) + ops.ad * ops.a;
}

/// Qubit decay sigma_-^1, sigma_-^2 at gamma_eff each.
inline std::vector<CollapseChannel> dissipation_channels(const EngineParams& p, const SubsystemLayout& layout) {
    const auto q = qubit_ops();
    return {{embed(q.sigma_minus, 0, layout), p.gamma()}, {embed(q.sigma_minus, 1, layout), p.gamma()}};
}

inline std::vector<CollapseChannel> build_dissipation(const EngineParams& p) {
    return dissipation_channels(p, SubsystemLayout::engine(p.breath_levels, p.com_levels));
}

/// |SS><SS| (x) thermal(n_h) (x) thermal(n_c) on the full layout.
inline QuantumState initial_state(const EngineParams& p) {
    p.validate();
    Dense ss = Dense::Zero(4, 4);
    ss(0, 0) = 1.0;
    Dense rho = kron(kron(ss, thermal_state(p.n_h, p.breath_levels).data()), thermal_state(p.n_c, p.com_levels).data());
    return QuantumState::unchecked(StateKind::Density, std::move(rho),
                                   SubsystemLayout::engine(p.breath_levels, p.com_levels));
}

// ---------------------------------------------------------------------------
// Cycle orchestration.

/// Scalars recorded along the cycle.
struct Snapshot {
    double t = 0;
    double p_ss = 0, p_single = 0, p_dd = 0;
    double n_b = 0, n_c = 0;
    double concurrence = 0, ms_fidelity = 0;
};

struct StrokeTrace {
    int id = 0;
    double t_start = 0, t_end = 0;
    std::vector<Snapshot> rows;
    StepReport report;
};

struct CycleRecord {
    double t_gate = 0;
    double tau3 = 0;
    std::vector<StrokeTrace> strokes;  // strokes of zero duration are skipped
    std::optional<Snapshot> initial;
    std::array<std::optional<Snapshot>, 4> end_of_stroke;

    double delta_n_o = 0;
    double delta_n_t = 0;
    std::optional<double> eta_c;
    double w_exact = 0;
    double w_diag = 0;
    std::optional<double> eta_m;        // diagonal ergotropy over Delta n_t
    std::optional<double> eta_m_exact;  // full ergotropy over Delta n_t
    Dense load_after_stroke3;           // COM reduced density at end of stroke 3
    std::optional<QuantumState> final_state;
};

/// Delta n_t from the record's initial and end-of-stroke-3 COM means.
inline double net_phonon_gain(const CycleRecord& r) {
    if (!r.initial || !r.end_of_stroke[2])
        throw Error(ErrorCode::IncompleteRecord, "record lacks the initial or end-of-stroke-3 snapshot");
    return net_phonon_gain(r.initial->n_c, r.end_of_stroke[2]->n_c);
}

struct CycleOptions {
    int record_stride = 10;
    bool keep_final_state = false;
};

namespace detail {

/// A propagation space: qubits in slots 0,1 plus the modes present. A mode
/// that is absent is a spectator whose marginal is frozen; its mean is kept.
struct Space {
    SubsystemLayout layout;
    std::optional<std::size_t> breath;
    std::optional<std::size_t> com;
    double breath_mean = 0;
    double com_mean = 0;
};

struct EngineState {
    QuantumState rho;
    Space space;
    double t = 0;  // global cycle time
};

inline Snapshot snapshot(double t, const Dense& rho, const Space& s) {
    const auto st = QuantumState::unchecked(StateKind::Density, rho, s.layout);
    const Dense q = two_qubit_state(st);
    const auto pops = populations_of(q);
    Snapshot out;
    out.t = t;
    out.p_ss = pops.ss;
    out.p_single = pops.single_excitation();
    out.p_dd = pops.dd;
    out.n_b = s.breath ? expect(embed(number(s.layout.dim(*s.breath)), *s.breath, s.layout), st).real() : s.breath_mean;
    out.n_c = s.com ? expect(embed(number(s.layout.dim(*s.com)), *s.com, s.layout), st).real() : s.com_mean;
    out.concurrence = concurrence(q);
    out.ms_fidelity = ms_fidelity(q);
    return out;
}

inline double mode_mean(double nbar, int dim) {
    const auto p = thermal_populations(nbar, dim);
    double m = 0;
    for (std::size_t n = 0; n < p.size(); ++n) m += static_cast<double>(n) * p[n];
    return m;
}

/// State at t = 0 on the space used for stroke 1.
inline EngineState start(const EngineParams& p) {
    p.validate();
    if (p.full_space) {
        Space s{SubsystemLayout::engine(p.breath_levels, p.com_levels), 2, 3, 0, 0};
        return {initial_state(p), s, 0.0};
    }
    Dense ss = Dense::Zero(4, 4);
    ss(0, 0) = 1.0;
    SubsystemLayout l({2, 2, p.breath_levels}, {"q1", "q2", "breath"});
    Space s{l, 2, std::nullopt, 0, mode_mean(p.n_c, p.com_levels)};
    return {QuantumState::unchecked(StateKind::Density, kron(ss, thermal_state(p.n_h, p.breath_levels).data()), l), s,
            0.0};
}

/// After stroke 1 the breath mode never couples again and the COM mode is still
/// in its initial thermal product state, so tracing out the breath mode and
/// appending the COM thermal state reproduces every later qubit/COM observable.
inline EngineState to_load_space(const EngineParams& p, EngineState st) {
    if (p.full_space || st.space.com) return st;
    const double nb = snapshot(st.t, st.rho.data(), st.space).n_b;
    const Dense q = partial_trace(st.rho, {0, 1}).data();
    SubsystemLayout l({2, 2, p.com_levels}, {"q1", "q2", "com"});
    Space s{l, std::nullopt, 2, nb, 0};
    return {QuantumState::unchecked(StateKind::Density, kron(q, thermal_state(p.n_c, p.com_levels).data()), l), s,
            st.t};
}

inline ScheduledHamiltonian stroke_hamiltonian(int id, const EngineParams& p, const Space& s, double duration) {
    switch (id) {
    case 1: return ms_hamiltonian(p, s.layout, *s.breath, duration);
    case 2: return ramp_hamiltonian(p, s.layout, *s.com, RampDirection::Down);
    case 3: return jc_hamiltonian(p, s.layout, *s.com, duration);
    default: return ramp_hamiltonian(p, s.layout, *s.com, RampDirection::Up);
    }
}

inline double stroke_dt(int id, const EngineParams& p) {
    switch (id) {
    case 1: return p.dt_stroke1;
    case 2: return p.dt_stroke2;
    case 3: return p.dt_stroke3;
    default: return p.dt_stroke4;
    }
}

/// Propagates one stroke; appends its trace when `trace` is given.
inline void run_stroke(int id, const EngineParams& p, EngineState& st, double duration, int stride,
                       StrokeTrace* trace) {
    if (id >= 2) st = to_load_space(p, std::move(st));
    if (!(duration > 0)) return;
    try {
        const auto h = stroke_hamiltonian(id, p, st.space, duration);
        std::vector<CollapseChannel> channels;
        if (id == 4) channels = dissipation_channels(p, st.space.layout);
        EvolveOptions opt;
        opt.t0 = 0;
        opt.t1 = duration;
        opt.dt = stroke_dt(id, p);
        opt.record_stride = stride;
        const double offset = st.t;
        if (trace) {
            trace->id = id;
            trace->t_start = offset;
            trace->t_end = offset + duration;
            opt.recorder = [&](double t, const Dense& rho) { trace->rows.push_back(snapshot(offset + t, rho, st.space)); };
        }
        auto res = evolve(st.rho, h, channels, opt);
        if (trace) trace->report = res.report;
        st.rho = std::move(res.final_state);
        st.t = offset + duration;
    } catch (const Error& e) {
        throw Error(e.code(), "stroke " + std::to_string(id) + ": " + e.what());
    }
}

inline Dense load_density(const EngineState& st) {
    if (!st.space.com) throw Error(ErrorCode::IncompleteRecord, "load mode not present in the propagation space");
    return partial_trace(st.rho, {*st.space.com}).data();
}

}  // namespace detail

/// Runs strokes 1..4 from `initial_state(p)` and fills every summary scalar.
inline CycleRecord run_cycle(const EngineParams& p, double t_gate, double tau3, const CycleOptions& opt = {}) {
    if (!(t_gate >= 0)) throw Error(ErrorCode::InvalidParameter, "t_gate must be >= 0");
    if (!(tau3 > 0)) throw Error(ErrorCode::InvalidParameter, "tau3 must be > 0");
    auto st = detail::start(p);

    CycleRecord rec;
    rec.t_gate = t_gate;
    rec.tau3 = tau3;
    rec.initial = detail::snapshot(0.0, st.rho.data(), st.space);

    const std::array<double, 4> durations{t_gate, p.ramp_down.duration(), tau3, p.ramp_up.duration()};
    Snapshot last = *rec.initial;
    for (int id = 1; id <= 4; ++id) {
        StrokeTrace trace;
        detail::run_stroke(id, p, st, durations[static_cast<std::size_t>(id - 1)], opt.record_stride, &trace);
        if (!trace.rows.empty()) {
            last = trace.rows.back();
            rec.strokes.push_back(std::move(trace));
        } else {
            last.t = st.t;
        }
        rec.end_of_stroke[static_cast<std::size_t>(id - 1)] = last;
        if (id == 3) rec.load_after_stroke3 = detail::load_density(st);
    }

    const auto& s1 = *rec.end_of_stroke[0];
    rec.delta_n_o = absorbed_quanta({s1.p_ss, s1.p_single, 0.0, s1.p_dd});
    rec.delta_n_t = net_phonon_gain(rec);
    rec.eta_c = conversion_efficiency(rec.delta_n_t, rec.delta_n_o);

    const Operator hp = load_hamiltonian(static_cast<int>(rec.load_after_stroke3.rows()));
    const Dense load = 0.5 * (rec.load_after_stroke3 + rec.load_after_stroke3.adjoint());
    rec.w_exact = ergotropy(load / load.trace().real(), hp);
    rec.w_diag = ergotropy_diagonal(PhononDistribution::from_density(load));
    rec.eta_m = mechanical_efficiency(rec.w_diag, rec.delta_n_t);
    rec.eta_m_exact = mechanical_efficiency(rec.w_exact, rec.delta_n_t);
    if (opt.keep_final_state) rec.final_state = st.rho;
    return rec;
}

struct ScanWindow {
    double lo = 5.0;
    double hi = 60.0;
    double step = 0.5;

    std::vector<double> points() const {
        if (!(lo > 0) || !(step > 0) || hi < lo) throw Error(ErrorCode::InvalidParameter, "empty or invalid scan window");
        std::vector<double> out;
        const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long k = 0; k <= n; ++k) out.push_back(lo + static_cast<double>(k) * step);
        return out;
    }
};

struct TransferOptimum {
    double tau_star = 0;
    double delta_n_t = 0;
    std::vector<double> taus;
    std::vector<double> n_c;  // COM mean at each scanned duration
};

/// Runs strokes 1-2 once, then scans the stroke-3 duration and returns the
/// argmax of the COM mean (ties go to the shorter duration).
inline TransferOptimum optimize_transfer_time(const EngineParams& p, double t_gate, const ScanWindow& scan = {}) {
    const auto taus = scan.points();
    auto st = detail::start(p);
    const double n0 = detail::snapshot(0.0, st.rho.data(), st.space).n_c;
    detail::run_stroke(1, p, st, t_gate, 1 << 30, nullptr);
    detail::run_stroke(2, p, st, p.ramp_down.duration(), 1 << 30, nullptr);

    TransferOptimum out;
    out.taus = taus;
    const auto h = detail::stroke_hamiltonian(3, p, st.space, taus.back());
    const Operator ncom = embed(number(st.space.layout.dim(*st.space.com)), *st.space.com, st.space.layout);
    QuantumState rho = st.rho;
    double t = 0;
    for (double tau : taus) {
        if (tau > t) {
            rho = evolve(rho, h, {}, t, tau, p.dt_stroke3).final_state;
            t = tau;
        }
        out.n_c.push_back(expect(ncom, rho).real());
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < out.n_c.size(); ++k)
        if (out.n_c[k] > out.n_c[best]) best = k;
    out.tau_star = taus[best];
    out.delta_n_t = out.n_c[best] - n0;
    return out;
}

enum class Tau3Policy { Fixed, Reoptimized };

struct SweepOptions {
    Tau3Policy policy = Tau3Policy::Fixed;
    /// Fixed-policy duration; when empty it is optimized at the closed-loop gate time.
    std::optional<double> tau3;
    ScanWindow scan{};
    int workers = 1;
    CycleOptions cycle{};
};

struct SweepPoint {
    double t_gate = 0;
    double tau3 = 0;
    std::optional<CycleRecord> record;
    std::string error;  // non-empty when the point failed
};

/// Default grid 4..72 us in 4 us steps.
inline std::vector<double> default_gate_grid(double start = 4.0, double stop = 72.0, double step = 4.0) {
    std::vector<double> g;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= n; ++k) g.push_back(start + static_cast<double>(k) * step);
    return g;
}

/// One cycle per grid point, results in grid order whatever the worker count.
inline std::vector<SweepPoint> sweep_gate_time(const EngineParams& p, const std::vector<double>& grid,
                                               const SweepOptions& opt = {}) {
    if (grid.empty()) throw Error(ErrorCode::InvalidParameter, "sweep grid is empty");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw Error(ErrorCode::InvalidParameter, "sweep grid must be increasing");
    p.validate();

    double fixed_tau = 0;
    if (opt.policy == Tau3Policy::Fixed)
        fixed_tau = opt.tau3 ? *opt.tau3 : optimize_transfer_time(p, p.gate_time(), opt.scan).tau_star;

    std::vector<SweepPoint> out(grid.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < grid.size(); k = next++) {
            SweepPoint& pt = out[k];
            pt.t_gate = grid[k];
            try {
                pt.tau3 = opt.policy == Tau3Policy::Fixed ? fixed_tau
                                                          : optimize_transfer_time(p, grid[k], opt.scan).tau_star;
                pt.record = run_cycle(p, grid[k], pt.tau3, opt.cycle);
            } catch (const std::exception& e) {
                pt.error = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(opt.workers, static_cast<int>(grid.size())));
    std::vector<std::jthread> pool;
    for (int w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    return out;
}

struct TruncationDrift {
    std::string name;
    double base = 0;
    double enlarged = 0;
    double drift() const { return std::abs(enlarged - base); }
};

/// Summary scalars of a cycle, name/value pairs in a fixed order.
inline std::vector<std::pair<std::string, double>> summary_scalars(const CycleRecord& r) {
    const auto& e = r.end_of_stroke;
    auto nan_if = [](const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); };
    return {{"delta_n_o", r.delta_n_o},
            {"delta_n_t", r.delta_n_t},
            {"eta_c", nan_if(r.eta_c)},
            {"W_exact", r.w_exact},
            {"W_diag", r.w_diag},
            {"eta_m", nan_if(r.eta_m)},
            {"eta_m_exact", nan_if(r.eta_m_exact)},
            {"concurrence", e[0] ? e[0]->concurrence : 0.0},
            {"ms_fidelity", e[0] ? e[0]->ms_fidelity : 0.0},
            {"P_SS_final", e[3] ? e[3]->p_ss : 0.0}};
}

/// Re-runs the cycle with both truncations enlarged and reports the drift of every summary scalar.
inline std::vector<TruncationDrift> audit_truncation(const EngineParams& p, double t_gate, double tau3,
                                                     int extra_levels = 4) {
    EngineParams big = p;
    big.breath_levels += extra_levels;
    big.com_levels += extra_levels;
    const auto a = summary_scalars(run_cycle(p, t_gate, tau3));
    const auto b = summary_scalars(run_cycle(big, t_gate, tau3));
    std::vector<TruncationDrift> out;
    for (std::size_t k = 0; k < a.size(); ++k) out.push_back({a[k].first, a[k].second, b[k].second});
    return out;
}

}  // namespace qengine
