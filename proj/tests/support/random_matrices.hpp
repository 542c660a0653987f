#pragma once

// Test-only generators for random states, Hermitian matrices and Haar unitaries.

#include <Eigen/Dense>

#include <complex>
#include <random>

namespace qengine::testing {

using Rng = std::mt19937_64;

inline Eigen::MatrixXcd ginibre(long rows, long cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXcd g(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) g(i, j) = {n(rng), n(rng)};
    return g;
}

/// Full-rank random density matrix (Hilbert-Schmidt measure).
inline Eigen::MatrixXcd random_density(long dim, Rng& rng) {
    const Eigen::MatrixXcd g = ginibre(dim, dim, rng);
    Eigen::MatrixXcd rho = g * g.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

/// Random density of rank `rank`.
inline Eigen::MatrixXcd random_density(long dim, long rank, Rng& rng) {
    const Eigen::MatrixXcd g = ginibre(dim, rank, rng);
    Eigen::MatrixXcd rho = g * g.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

inline Eigen::MatrixXcd random_hermitian(long dim, Rng& rng) {
    const Eigen::MatrixXcd g = ginibre(dim, dim, rng);
    return 0.5 * (g + g.adjoint());
}

/// Haar-distributed unitary via QR with the phase correction of the R diagonal.
inline Eigen::MatrixXcd random_unitary(long dim, Rng& rng) {
    const Eigen::MatrixXcd g = ginibre(dim, dim, rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ();
    const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (long k = 0; k < dim; ++k) {
        const auto d = r(k, k);
        q.col(k) *= d / std::abs(d);
    }
    return q;
}

inline Eigen::VectorXd random_simplex(long n, Rng& rng) {
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd p(n);
    for (long k = 0; k < n; ++k) p(k) = e(rng);
    return p / p.sum();
}

}  // namespace qengine::testing
