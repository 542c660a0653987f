#include <gtest/gtest.h>

#include <cmath>

#include "qengine/dynamics.hpp"
#include "qengine/engine.hpp"
#include "support/random_matrices.hpp"

using namespace qengine;
using qengine::testing::Rng;

namespace {

ScheduledHamiltonian constant(const Operator& h, double t_end = 1.0) {
    ScheduledHamiltonian s(h.dim(), 0.0, t_end);
    s.add_constant(h, 1.0);
    return s;
}

Dense projector(long dim, long k) {
    Dense p = Dense::Zero(dim, dim);
    p(k, k) = 1.0;
    return p;
}

}  // namespace

TEST(LindbladRhs, PureDecayGenerator) {
    const double gamma = 0.7;
    const auto q = qubit_ops();
    const Operator zero(Sparse(2, 2));
    const Dense rhs = lindblad_rhs(projector(2, 1), zero, {{q.sigma_minus, gamma}});
    EXPECT_NEAR(rhs(1, 1).real(), -gamma, 1e-15);
    EXPECT_NEAR(rhs(0, 0).real(), gamma, 1e-15);
    EXPECT_NEAR(std::abs(rhs(0, 1)) + std::abs(rhs(1, 0)), 0.0, 1e-15);
}

TEST(LindbladRhs, StationaryWhenCommuting) {
    const Operator h = number(5);
    const Dense rho = thermal_state(0.4, 5).data();
    EXPECT_NEAR(lindblad_rhs(rho, h, {}).norm(), 0.0, 1e-15);
}

TEST(LindbladRhs, TracelessAndHermitianOnRandomInstances) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const long dim = 2 + trial % 5;
        const Dense rho = qengine::testing::random_density(dim, rng);
        const auto h = Operator::from_dense(qengine::testing::random_hermitian(dim, rng));
        std::vector<CollapseChannel> ch;
        for (int k = 0; k < 1 + trial % 3; ++k)
            ch.push_back({Operator::from_dense(qengine::testing::ginibre(dim, dim, rng)), 0.1 + 0.3 * k});
        const Dense out = lindblad_rhs(rho, h, ch);
        EXPECT_LT(std::abs(out.trace()), 1e-12);
        EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(LindbladRhs, DimensionMismatch) {
    EXPECT_THROW(lindblad_rhs(Dense::Identity(3, 3) / 3.0, number(4), {}), Error);
}

TEST(Evolve, JaynesCummingsVacuumRabi) {
    const double g = 1.0;
    const SubsystemLayout l({2, 4});
    const auto q = qubit_ops();
    const Operator sp = embed(q.sigma_plus, 0, l);
    const Operator a = embed(destroy(4), 1, l);
    const Operator h = g * (sp * a + sp.dagger() * a.dagger());
    const auto psi0 = QuantumState::basis({1, 0}, l);
    const auto res = evolve(psi0, constant(h, 4.0), {}, 0.0, 4.0, 1e-3 / g, {embed(q.projector_D, 0, l)}, 50);
    ASSERT_GT(res.times.size(), 50u);
    for (std::size_t k = 0; k < res.times.size(); ++k) {
        const double expected = std::pow(std::cos(g * res.times[k]), 2);
        EXPECT_NEAR(res.observables[k][0], expected, 1e-6) << "t=" << res.times[k];
    }
}

TEST(Evolve, ExponentialDecay) {
    const double gamma = 1.3;
    const auto q = qubit_ops();
    const ScheduledHamiltonian h(2, 0.0, 3.0);
    const auto res = evolve(QuantumState::basis({1}, SubsystemLayout({2})), h, {{q.sigma_minus, gamma}}, 0.0, 3.0,
                            1e-3, {q.projector_D}, 25);
    for (std::size_t k = 0; k < res.times.size(); ++k)
        EXPECT_NEAR(res.observables[k][0], std::exp(-gamma * res.times[k]), 1e-6);
}

TEST(Evolve, TimesStrictlyIncreasingAndEndpointsRecorded) {
    const auto res = evolve(QuantumState::basis({0}, SubsystemLayout({3})), constant(number(3)), {}, 0.0, 1.0, 0.03,
                            {}, 7);
    EXPECT_DOUBLE_EQ(res.times.front(), 0.0);
    EXPECT_DOUBLE_EQ(res.times.back(), 1.0);
    for (std::size_t k = 1; k < res.times.size(); ++k) EXPECT_GT(res.times[k], res.times[k - 1]);
    EXPECT_EQ(res.report.steps, 34);
    EXPECT_NEAR(res.report.dt_used * res.report.steps, 1.0, 1e-12);
}

TEST(Evolve, RejectsBadWindows) {
    const auto s = QuantumState::basis({0}, SubsystemLayout({3}));
    EXPECT_THROW(evolve(s, constant(number(3)), {}, 1.0, 1.0, 0.1), Error);
    EXPECT_THROW(evolve(s, constant(number(3)), {}, 0.0, 1.0, 0.0), Error);
    EXPECT_THROW(evolve(s, constant(number(4)), {}, 0.0, 1.0, 0.1), Error);
}

TEST(Evolve, DivergenceIsReported) {
    const auto q = qubit_ops();
    const Operator h = 1000.0 * (q.sigma_plus + q.sigma_minus);
    try {
        evolve(QuantumState::basis({0}, SubsystemLayout({2})), constant(h, 200.0), {{q.sigma_minus, 1.0}}, 0.0, 200.0,
               1.0);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IntegrationDiverged);
    }
}

TEST(Evolve, UnitaryRunsConservePurity) {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const long dim = 6;
        const auto h = Operator::from_dense(qengine::testing::random_hermitian(dim, rng));
        const Dense rho0 = qengine::testing::random_density(dim, 1, rng);
        const auto res = evolve(QuantumState::density(rho0, SubsystemLayout({6})), constant(h, 5.0), {}, 0.0, 5.0, 0.005);
        EXPECT_NEAR(res.final_state.purity(), 1.0, 1e-8);
    }
}

TEST(Evolve, LinearInTheInitialState) {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const long dim = 4;
        const SubsystemLayout l({4});
        const auto h = Operator::from_dense(qengine::testing::random_hermitian(dim, rng));
        std::vector<CollapseChannel> ch{{Operator::from_dense(qengine::testing::ginibre(dim, dim, rng)), 0.2}};
        const Dense r1 = qengine::testing::random_density(dim, rng);
        const Dense r2 = qengine::testing::random_density(dim, rng);
        const double p = 0.3;
        auto run = [&](const Dense& r) {
            return evolve(QuantumState::density(r, l), constant(h, 2.0), ch, 0.0, 2.0, 0.002).final_state.data();
        };
        const Dense mixed = run(p * r1 + (1 - p) * r2);
        const Dense combined = p * run(r1) + (1 - p) * run(r2);
        EXPECT_LT((mixed - combined).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Evolve, DissipativeStrokeKeepsTraceAndPositivity) {
    EngineParams p;
    const SubsystemLayout l({2, 2, p.com_levels}, {"q1", "q2", "com"});
    Dense qubits = Dense::Zero(4, 4);
    qubits(3, 3) = 0.5;
    qubits(1, 1) = 0.25;
    qubits(2, 2) = 0.25;
    const auto rho = QuantumState::density(kron(qubits, thermal_state(0.5, p.com_levels).data()), l);
    EvolveOptions opt;
    opt.t1 = p.ramp_up.duration();
    opt.dt = p.dt_stroke4;
    opt.record_stride = 100;
    opt.keep_snapshots = true;
    const auto res = evolve(rho, ramp_hamiltonian(p, l, 2, RampDirection::Up), dissipation_channels(p, l), opt);
    EXPECT_LE(res.report.trace_drift, 1e-8 * opt.t1);
    for (const auto& s : res.snapshots) {
        Eigen::SelfAdjointEigenSolver<Dense> es(s, Eigen::EigenvaluesOnly);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6);
    }
}

TEST(Evolve, TraceDriftWithinBudgetOnCoherentStrokes) {
    EngineParams p;
    const SubsystemLayout l({2, 2, p.breath_levels});
    Dense ss = Dense::Zero(4, 4);
    ss(0, 0) = 1.0;
    const auto rho = QuantumState::density(kron(ss, thermal_state(p.n_h, p.breath_levels).data()), l);
    const auto res = evolve(rho, ms_hamiltonian(p, l, 2, p.gate_time()), {}, 0.0, p.gate_time(), p.dt_stroke1, {}, 1);
    EXPECT_LE(res.report.trace_drift, 1e-8 * p.gate_time());
}

TEST(Evolve, StepHalvingOnChargingStroke) {
    EngineParams p;
    const SubsystemLayout l({2, 2, p.breath_levels});
    Dense ss = Dense::Zero(4, 4);
    ss(0, 0) = 1.0;
    const auto rho = QuantumState::density(kron(ss, thermal_state(p.n_h, p.breath_levels).data()), l);
    const auto q = qubit_ops();
    const std::vector<Operator> obs{embed(q.projector_D, 0, l) * embed(q.projector_D, 1, l),
                                    embed(q.projector_S, 0, l) * embed(q.projector_S, 1, l),
                                    embed(number(p.breath_levels), 2, l)};
    const auto h = ms_hamiltonian(p, l, 2, 36.0);
    const auto coarse = evolve(rho, h, {}, 0.0, 36.0, 0.02, obs, 10);
    const auto fine = evolve(rho, h, {}, 0.0, 36.0, 0.01, obs, 20);
    ASSERT_EQ(coarse.times.size(), fine.times.size());
    double worst = 0;
    for (std::size_t k = 0; k < coarse.times.size(); ++k) {
        ASSERT_NEAR(coarse.times[k], fine.times[k], 1e-12);
        for (std::size_t j = 0; j < obs.size(); ++j)
            worst = std::max(worst, std::abs(coarse.observables[k][j] - fine.observables[k][j]));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(ScheduledHamiltonian, EngineHamiltoniansAreHermitian) {
    EngineParams p;
    p.breath_levels = 4;
    p.com_levels = 5;
    for (double t : {0.0, 0.05, 0.13, 0.27, 0.39}) {
        EXPECT_LT(build_ms_hamiltonian(p).hermiticity_error(t * 50), 1e-10);
        EXPECT_LT(build_ramp_hamiltonian(p, RampDirection::Down).hermiticity_error(t), 1e-10);
        EXPECT_LT(build_ramp_hamiltonian(p, RampDirection::Up).hermiticity_error(t * 12), 1e-10);
        EXPECT_LT(build_jc_hamiltonian(p).hermiticity_error(t), 1e-10);
    }
}
