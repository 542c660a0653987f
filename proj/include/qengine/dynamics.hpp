#pragma once

// Fixed-step RK4 propagation of the Lindblad master equation
//   d rho/dt = -i[H(t), rho] + sum_k (g_k/2)(2 L rho L^+ - L^+L rho - rho L^+L)
// with H(t) = sum_j c_j(t) A_j. Times in microseconds, rates in 1/us.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qengine/opalg.hpp"

namespace qengine {

struct HamiltonianTerm {
    Operator op;
    std::function<cplx(double)> coeff;
};

/// H(t) = sum_k coeff_k(t) op_k over a validity window.
class ScheduledHamiltonian {
public:
    ScheduledHamiltonian() = default;
    ScheduledHamiltonian(long dim, double t_start, double t_end) : dim_(dim), t_start_(t_start), t_end_(t_end) {}

    void add(Operator op, std::function<cplx(double)> coeff) {
        if (op.dim() != dim_) throw Error(ErrorCode::Layout, "Hamiltonian term has wrong dimension");
        terms_.push_back({std::move(op), std::move(coeff)});
    }
    void add_constant(Operator op, cplx c) {
        add(std::move(op), [c](double) { return c; });
    }

    long dim() const { return dim_; }
    double t_start() const { return t_start_; }
    double t_end() const { return t_end_; }
    double duration() const { return t_end_ - t_start_; }
    const std::vector<HamiltonianTerm>& terms() const { return terms_; }

    Operator at(double t) const {
        Sparse h(dim_, dim_);
        for (const auto& term : terms_) h += term.coeff(t) * term.op.matrix();
        return Operator(std::move(h)).pruned();
    }

    /// Largest |H(t) - H(t)^+| entry.
    double hermiticity_error(double t) const {
        return (at(t).dense() - at(t).dense().adjoint()).cwiseAbs().maxCoeff();
    }

private:
    long dim_ = 0;
    double t_start_ = 0.0;
    double t_end_ = 0.0;
    std::vector<HamiltonianTerm> terms_;
};

struct CollapseChannel {
    Operator op;
    double rate = 0.0;
};

namespace detail {

/// Precomputed pieces of the Lindblad generator.
class Generator {
public:
    Generator(const ScheduledHamiltonian* h, const Operator* static_h, const std::vector<CollapseChannel>& channels)
        : h_(h), static_h_(static_h) {
        for (const auto& c : channels) {
            if (c.rate < 0) throw Error(ErrorCode::InvalidParameter, "collapse rate must be >= 0");
            if (c.rate == 0.0) continue;
            Sparse l = c.op.matrix();
            Sparse ld = l.adjoint();
            Sparse ldl = ld * l;
            channels_.push_back({c.rate, std::move(l), std::move(ld), std::move(ldl)});
        }
    }

    void operator()(double t, const Dense& rho, Dense& out) const {
        const cplx mi(0.0, -1.0);
        out.setZero(rho.rows(), rho.cols());
        if (static_h_) {
            const Sparse& a = static_h_->matrix();
            out.noalias() += mi * (a * rho);
            out.noalias() -= mi * (rho * a);
        }
        if (h_) {
            for (const auto& term : h_->terms()) {
                const cplx c = mi * term.coeff(t);
                if (c == cplx(0.0)) continue;
                const Sparse& a = term.op.matrix();
                out.noalias() += c * (a * rho);
                out.noalias() -= c * (rho * a);
            }
        }
        for (const auto& ch : channels_) {
            out.noalias() += ch.rate * (ch.l * (rho * ch.ld));
            out.noalias() -= (0.5 * ch.rate) * (ch.ldl * rho);
            out.noalias() -= (0.5 * ch.rate) * (rho * ch.ldl);
        }
    }

private:
    struct Channel {
        double rate;
        Sparse l, ld, ldl;
    };
    const ScheduledHamiltonian* h_;
    const Operator* static_h_;
    std::vector<Channel> channels_;
};

inline double hermiticity_drift(const Dense& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Right-hand side of the master equation for a fixed Hamiltonian.
inline Dense lindblad_rhs(const Dense& rho, const Operator& h, const std::vector<CollapseChannel>& channels) {
    if (rho.rows() != h.dim() || rho.cols() != h.dim())
        throw Error(ErrorCode::Layout, "lindblad_rhs(): rho and H dimensions differ");
    for (const auto& c : channels)
        if (c.op.dim() != h.dim()) throw Error(ErrorCode::Layout, "lindblad_rhs(): jump operator dimension differs");
    detail::Generator gen(nullptr, &h, channels);
    Dense out;
    gen(0.0, rho, out);
    return out;
}

struct StepReport {
    double dt_used = 0.0;
    long steps = 0;
    double trace_drift = 0.0;        // max |tr rho - 1| seen at check points, before renormalization
    double hermiticity_drift = 0.0;  // max |rho - rho^+| seen at check points
    bool renormalized = false;
};

struct EvolutionResult {
    std::vector<double> times;
    std::vector<std::vector<double>> observables;  // [record][observable], real parts
    std::vector<Dense> snapshots;                  // only with EvolveOptions::keep_snapshots
    QuantumState final_state = QuantumState::unchecked(StateKind::Density, Dense(), SubsystemLayout({2}));
    StepReport report;
};

struct EvolveOptions {
    double t0 = 0.0;
    double t1 = 0.0;
    double dt = 0.01;
    std::vector<Operator> observables;
    int record_stride = 1;
    bool keep_snapshots = false;
    /// Called at every recorded time with the current density matrix.
    std::function<void(double, const Dense&)> recorder;
    double trace_tolerance = 1e-6;
    double hermiticity_tolerance = 1e-6;
};

/// Classical RK4 at a fixed step. The step is shrunk uniformly so that an
/// integer number of steps covers [t0, t1]. The final state's trace is
/// corrected once if its drift is within tolerance.
inline EvolutionResult evolve(const QuantumState& initial, const ScheduledHamiltonian& h,
                              const std::vector<CollapseChannel>& channels, const EvolveOptions& opt) {
    if (!(opt.t1 > opt.t0)) throw Error(ErrorCode::InvalidParameter, "evolve(): t1 must exceed t0");
    if (!(opt.dt > 0)) throw Error(ErrorCode::InvalidParameter, "evolve(): dt must be positive");
    if (opt.record_stride < 1) throw Error(ErrorCode::InvalidParameter, "evolve(): record_stride must be >= 1");
    if (initial.dim() != h.dim()) throw Error(ErrorCode::Layout, "evolve(): state and Hamiltonian dimensions differ");
    for (const auto& c : channels)
        if (c.op.dim() != h.dim()) throw Error(ErrorCode::Layout, "evolve(): jump operator dimension differs");
    for (const auto& o : opt.observables)
        if (o.dim() != h.dim()) throw Error(ErrorCode::Layout, "evolve(): observable dimension differs");

    const double span = opt.t1 - opt.t0;
    const long steps = std::max<long>(1, static_cast<long>(std::ceil(span / opt.dt - 1e-9)));
    const double dt = span / static_cast<double>(steps);

    detail::Generator gen(&h, nullptr, channels);
    Dense rho = initial.to_density().data();
    Dense k1, k2, k3, k4, tmp;

    EvolutionResult res;
    res.report.dt_used = dt;
    res.report.steps = steps;

    auto check = [&](double t) {
        const double tr = std::abs(rho.trace() - cplx(1.0));
        const double he = detail::hermiticity_drift(rho);
        if (!std::isfinite(tr) || !std::isfinite(he))
            throw Error(ErrorCode::IntegrationDiverged, "non-finite density matrix at t=" + std::to_string(t));
        res.report.trace_drift = std::max(res.report.trace_drift, tr);
        res.report.hermiticity_drift = std::max(res.report.hermiticity_drift, he);
        if (tr > opt.trace_tolerance)
            throw Error(ErrorCode::IntegrationDiverged, "trace drift " + std::to_string(tr) + " at t=" + std::to_string(t));
        if (he > opt.hermiticity_tolerance)
            throw Error(ErrorCode::IntegrationDiverged,
                        "hermiticity drift " + std::to_string(he) + " at t=" + std::to_string(t));
    };
    auto record = [&](double t) {
        check(t);
        res.times.push_back(t);
        std::vector<double> vals;
        vals.reserve(opt.observables.size());
        const auto st = QuantumState::unchecked(StateKind::Density, rho, initial.layout());
        for (const auto& o : opt.observables) vals.push_back(expect(o, st).real());
        res.observables.push_back(std::move(vals));
        if (opt.keep_snapshots) res.snapshots.push_back(rho);
        if (opt.recorder) opt.recorder(t, rho);
    };

    record(opt.t0);
    for (long n = 0; n < steps; ++n) {
        const double t = opt.t0 + static_cast<double>(n) * dt;
        gen(t, rho, k1);
        tmp = rho + (0.5 * dt) * k1;
        gen(t + 0.5 * dt, tmp, k2);
        tmp = rho + (0.5 * dt) * k2;
        gen(t + 0.5 * dt, tmp, k3);
        tmp = rho + dt * k3;
        gen(t + dt, tmp, k4);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const long done = n + 1;
        if (done == steps) break;
        if (done % opt.record_stride == 0) record(opt.t0 + static_cast<double>(done) * dt);
    }

    check(opt.t1);
    const cplx tr = rho.trace();
    if (std::abs(tr - cplx(1.0)) > 0.0) {
        rho /= tr.real();
        res.report.renormalized = true;
    }
    // symmetrize away round-off
    rho = 0.5 * (rho + rho.adjoint()).eval();
    record(opt.t1);

    res.final_state = QuantumState::unchecked(StateKind::Density, std::move(rho), initial.layout());
    return res;
}

/// Positional convenience form.
inline EvolutionResult evolve(const QuantumState& initial, const ScheduledHamiltonian& h,
                              const std::vector<CollapseChannel>& channels, double t0, double t1, double dt,
                              std::vector<Operator> observables = {}, int record_stride = 1) {
    EvolveOptions opt;
    opt.t0 = t0;
    opt.t1 = t1;
    opt.dt = dt;
    opt.observables = std::move(observables);
    opt.record_stride = record_stride;
    return evolve(initial, h, channels, opt);
}

}  // namespace qengine
