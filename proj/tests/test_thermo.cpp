#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "qengine/thermo.hpp"
#include "support/random_matrices.hpp"

using namespace qengine;
using qengine::testing::Rng;

namespace {

Dense diag(std::initializer_list<double> v) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), d.data());
    return d.cast<cplx>().asDiagonal();
}

Dense bell() {
    Dense b = Dense::Zero(4, 4);
    b(0, 0) = b(3, 3) = 0.5;
    b(0, 3) = b(3, 0) = 0.5;
    return b;
}

double energy(const Dense& rho, const Dense& h) { return (rho * h).trace().real(); }

}  // namespace

TEST(Populations, ProductAndBell) {
    const auto ss = QuantumState::basis({0, 0, 0}, SubsystemLayout({2, 2, 3})).to_density();
    const auto p = qubit_populations(ss);
    EXPECT_DOUBLE_EQ(p.ss, 1.0);
    EXPECT_DOUBLE_EQ(p.sd + p.ds + p.dd, 0.0);
    const auto b = populations_of(bell());
    EXPECT_DOUBLE_EQ(b.ss, 0.5);
    EXPECT_DOUBLE_EQ(b.dd, 0.5);
    EXPECT_DOUBLE_EQ(b.single_excitation(), 0.0);
}

TEST(Populations, OrderingFollowsKron) {
    // |SD>: qubit 1 in S, qubit 2 in D is basis index 1
    const auto sd = QuantumState::basis({0, 1}, SubsystemLayout({2, 2})).to_density();
    const auto p = qubit_populations(sd);
    EXPECT_DOUBLE_EQ(p.sd, 1.0);
    EXPECT_DOUBLE_EQ(p.ds, 0.0);
}

TEST(AbsorbedQuanta, Examples) {
    EXPECT_DOUBLE_EQ(absorbed_quanta({1, 0, 0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(absorbed_quanta({0.5, 0, 0, 0.5}), 1.0);
    EXPECT_NEAR(absorbed_quanta({1 - 0.4851 - 0.02541, 0.02541, 0.0, 0.4851}), 0.99561, 1e-12);
}

TEST(NetPhononGain, Examples) {
    EXPECT_NEAR(net_phonon_gain(0.13, 0.91), 0.78, 1e-12);
    EXPECT_NEAR(net_phonon_gain(0.13 + 5.0, 0.91 + 5.0), 0.78, 1e-12);
}

TEST(Efficiencies, OperatingPointArithmetic) {
    EXPECT_NEAR(*conversion_efficiency(0.78, 0.99561), 0.7834, 5e-5);
    EXPECT_DOUBLE_EQ(*conversion_efficiency(0.7, 0.7), 1.0);
    EXPECT_DOUBLE_EQ(*conversion_efficiency(0.0, 0.7), 0.0);
    EXPECT_NEAR(*mechanical_efficiency(0.4242, 0.8108), 0.523, 5e-4);
    // 0.373 / 0.78
    EXPECT_NEAR(*mechanical_efficiency(0.373, 0.78), 0.478, 5e-4);
    EXPECT_DOUBLE_EQ(*mechanical_efficiency(0.0, 0.5), 0.0);
}

TEST(Efficiencies, UndefinedBelowThreshold) {
    EXPECT_FALSE(conversion_efficiency(0.01, 0.04).has_value());
    EXPECT_FALSE(mechanical_efficiency(0.01, 0.049).has_value());
    EXPECT_TRUE(conversion_efficiency(0.01, 0.051).has_value());
}

TEST(PhononDistribution, Validation) {
    EXPECT_THROW(PhononDistribution({0.5, 0.4}), Error);
    EXPECT_THROW(PhononDistribution({1.2, -0.2}), Error);
    const PhononDistribution d({0.25, 0.25, 0.5});
    EXPECT_DOUBLE_EQ(d.mean(), 1.25);
    EXPECT_EQ(d.nmax(), 2);
}

TEST(PassiveState, Examples) {
    const Dense th = thermal_state(0.4, 6).data();
    EXPECT_LT((passive_state(th, number(6)).state - th).norm(), 1e-12);
    const auto one = passive_state(diag({0, 1, 0}), number(3));
    EXPECT_LT((one.state - diag({1, 0, 0})).norm(), 1e-12);
    EXPECT_NEAR(one.energy, 0.0, 1e-15);
}

TEST(PassiveState, Idempotent) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const long dim = 2 + trial % 5;
        const Dense rho = qengine::testing::random_density(dim, rng);
        const auto h = Operator::from_dense(qengine::testing::random_hermitian(dim, rng));
        const Dense once = passive_state(rho, h).state;
        const Dense twice = passive_state(once, h).state;
        EXPECT_LT((once - twice).norm(), 1e-10);
        EXPECT_NEAR(ergotropy(once, h), 0.0, 1e-10);
    }
}

TEST(PassiveState, DegenerateSpectrumFlagged) {
    EXPECT_TRUE(passive_state(diag({0.5, 0.5}), Operator::identity(2)).degenerate_spectrum);
    EXPECT_FALSE(passive_state(diag({0.5, 0.5}), number(2)).degenerate_spectrum);
}

TEST(Ergotropy, Examples) {
    EXPECT_NEAR(ergotropy(diag({0, 0, 1, 0}), number(4)), 2.0, 1e-12);
    EXPECT_NEAR(ergotropy(thermal_state(0.13, 12).data(), number(12)), 0.0, 1e-10);
    EXPECT_NEAR(ergotropy(diag({0.3, 0.7}), number(2)), 0.4, 1e-12);
    EXPECT_NEAR(ergotropy_diagonal(PhononDistribution({0.3, 0.7})), 0.4, 1e-15);
    EXPECT_NEAR(ergotropy_diagonal(PhononDistribution(thermal_populations(0.13, 12))), 0.0, 1e-10);
}

TEST(Ergotropy, BoundsOnRandomStates) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const long dim = 2 + trial % 5;
        const Dense rho = qengine::testing::random_density(dim, rng);
        const Dense h = qengine::testing::random_hermitian(dim, rng);
        Eigen::SelfAdjointEigenSolver<Dense> es(h, Eigen::EigenvaluesOnly);
        const double w = ergotropy(rho, Operator::from_dense(h));
        EXPECT_GE(w, -1e-10);
        EXPECT_LE(w, energy(rho, h) - es.eigenvalues()(0) + 1e-10);
    }
}

TEST(Ergotropy, OptimalPermutationUnitaryExtractsExactly) {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const long dim = 2 + trial % 5;
        const Dense rho = qengine::testing::random_density(dim, rng);
        const Dense h = qengine::testing::random_hermitian(dim, rng);
        Eigen::SelfAdjointEigenSolver<Dense> er(rho), eh(h);
        // rho eigenvalues ascend; map the k-th largest onto the k-th lowest energy
        Dense u = Dense::Zero(dim, dim);
        for (long k = 0; k < dim; ++k) u += eh.eigenvectors().col(k) * er.eigenvectors().col(dim - 1 - k).adjoint();
        const double extracted = energy(rho, h) - energy(u * rho * u.adjoint(), h);
        EXPECT_NEAR(extracted, ergotropy(rho, Operator::from_dense(h)), 1e-10);
    }
}

TEST(Ergotropy, RandomUnitariesNeverBeatIt) {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const long dim = 2 + trial % 5;
        const Dense rho = qengine::testing::random_density(dim, rng);
        const Dense h = number(static_cast<int>(dim)).dense();
        const double w = ergotropy(rho, number(static_cast<int>(dim)));
        for (int k = 0; k < 200; ++k) {
            const Dense u = qengine::testing::random_unitary(dim, rng);
            EXPECT_LE(energy(rho, h) - energy(u * rho * u.adjoint(), h), w + 1e-9);
        }
    }
}

TEST(Ergotropy, DephasingNeverIncreasesIt) {
    Rng rng(19);
    for (int trial = 0; trial < 200; ++trial) {
        const long dim = 2 + trial % 5;
        const Dense rho = qengine::testing::random_density(dim, trial % 3 == 0 ? 1 : dim, rng);
        const double full = ergotropy(rho, number(static_cast<int>(dim)));
        const double diagonal = ergotropy_diagonal(PhononDistribution::from_density(rho));
        EXPECT_LE(diagonal, full + 1e-10);
    }
}

TEST(Ergotropy, RejectsInvalidInput) {
    EXPECT_THROW(ergotropy(diag({0.5, 0.6}), number(2)), Error);
    EXPECT_THROW(ergotropy(diag({0.5, 0.5}), number(3)), Error);
}

TEST(Concurrence, Examples) {
    EXPECT_NEAR(concurrence(bell()), 1.0, 1e-12);
    EXPECT_NEAR(concurrence(diag({1, 0, 0, 0})), 0.0, 1e-12);
    for (double p : {0.2, 0.5, 0.8, 1.0}) {
        const Dense w = p * bell() + (1 - p) * Dense::Identity(4, 4) / 4.0;
        EXPECT_NEAR(concurrence(w), std::max(0.0, (3 * p - 1) / 2), 1e-10) << "p=" << p;
    }
}

TEST(Concurrence, LocalUnitaryInvariance) {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const Dense rho = qengine::testing::random_density(4, 1 + trial % 4, rng);
        const Dense u = kron(Dense(qengine::testing::random_unitary(2, rng)), Dense(qengine::testing::random_unitary(2, rng)));
        EXPECT_NEAR(concurrence(rho), concurrence(u * rho * u.adjoint()), 1e-9);
    }
}

TEST(Concurrence, RejectsUnphysical) {
    try {
        concurrence(diag({1.1, -0.1, 0, 0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidState);
    }
}

TEST(MsFidelity, Examples) {
    EXPECT_NEAR(ms_fidelity(bell()), 1.0, 1e-15);
    EXPECT_NEAR(ms_fidelity(Dense::Identity(4, 4) / 4.0), 0.25, 1e-15);
    Dense phased = bell();
    phased(0, 3) = cplx(0, -0.5);
    phased(3, 0) = cplx(0, 0.5);
    EXPECT_NEAR(ms_fidelity(phased), 1.0, 1e-15);
}
