#pragma once

// Thermodynamic and entanglement observables of the working medium and the load.
// Energies of the load are in units of hbar*omega_c with the zero-point term
// dropped, i.e. H_p = a^+ a.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "qengine/opalg.hpp"

namespace qengine {

struct QubitPopulations {
    double ss = 0, sd = 0, ds = 0, dd = 0;
    double sum() const { return ss + sd + ds + dd; }
    double single_excitation() const { return sd + ds; }
};

/// 4x4 reduced state of the two qubits (slots 0 and 1) in the {SS, SD, DS, DD} basis.
inline Dense two_qubit_state(const QuantumState& state) {
    const auto& l = state.layout();
    if (l.slots() < 2 || l.dim(0) != 2 || l.dim(1) != 2)
        throw Error(ErrorCode::Layout, "layout does not start with two qubit slots");
    if (l.slots() == 2) return state.to_density().data();
    return partial_trace(state.to_density(), {0, 1}).data();
}

inline QubitPopulations populations_of(const Dense& rho2q) {
    if (rho2q.rows() != 4 || rho2q.cols() != 4) throw Error(ErrorCode::Layout, "expected a 4x4 two-qubit matrix");
    return {rho2q(0, 0).real(), rho2q(1, 1).real(), rho2q(2, 2).real(), rho2q(3, 3).real()};
}

inline QubitPopulations qubit_populations(const QuantumState& state) { return populations_of(two_qubit_state(state)); }

/// Photon quanta absorbed by qubits starting in |SS>: 2 P_DD + P_SD + P_DS.
inline double absorbed_quanta(const QubitPopulations& p) { return 2.0 * p.dd + p.sd + p.ds; }

/// Net phonon gain of the load relative to its initial mean.
inline double net_phonon_gain(double n_initial, double n_final) { return n_final - n_initial; }

inline constexpr double kEfficiencyThreshold = 0.05;

/// Delta n_t / Delta n_o; empty when too few quanta were absorbed for the ratio to mean anything.
inline std::optional<double> conversion_efficiency(double delta_n_t, double delta_n_o,
                                                   double threshold = kEfficiencyThreshold) {
    if (!(delta_n_o > threshold)) return std::nullopt;
    return delta_n_t / delta_n_o;
}

/// Ergotropy over the energy of the output phonons, both in units of hbar*omega_c.
inline std::optional<double> mechanical_efficiency(double ergotropy_value, double delta_n_t,
                                                   double threshold = kEfficiencyThreshold) {
    if (!(delta_n_t > threshold)) return std::nullopt;
    return ergotropy_value / delta_n_t;
}

class PhononDistribution {
public:
    PhononDistribution() = default;
    explicit PhononDistribution(std::vector<double> probs, double tol = 1e-6) : probs_(std::move(probs)) {
        if (probs_.empty()) throw Error(ErrorCode::InvalidParameter, "phonon distribution is empty");
        double s = 0;
        for (double p : probs_) {
            if (!(p >= 0.0)) throw Error(ErrorCode::InvalidParameter, "phonon distribution has a negative entry");
            s += p;
        }
        if (std::abs(s - 1.0) > tol) throw Error(ErrorCode::InvalidParameter, "phonon distribution does not sum to 1");
    }

    /// Diagonal of a load density matrix.
    static PhononDistribution from_density(const Dense& rho, double tol = 1e-6) {
        std::vector<double> p(static_cast<std::size_t>(rho.rows()));
        for (Eigen::Index n = 0; n < rho.rows(); ++n) p[static_cast<std::size_t>(n)] = std::max(0.0, rho(n, n).real());
        return PhononDistribution(std::move(p), tol);
    }

    const std::vector<double>& probs() const { return probs_; }
    int nmax() const { return static_cast<int>(probs_.size()) - 1; }
    double operator[](std::size_t n) const { return probs_.at(n); }

    double mean() const {
        double m = 0;
        for (std::size_t n = 0; n < probs_.size(); ++n) m += static_cast<double>(n) * probs_[n];
        return m;
    }

private:
    std::vector<double> probs_;
};

/// Load Hamiltonian a^+ a on `dim` Fock levels.
inline Operator load_hamiltonian(int dim) { return number(dim); }

struct PassiveResult {
    Dense state;
    double energy = 0.0;
    bool degenerate_spectrum = false;
};

namespace detail {

struct Spectrum {
    Eigen::VectorXd energies;  // ascending
    Dense vectors;
    bool degenerate = false;
};

inline Spectrum spectrum_of(const Operator& h) {
    const Dense hd = h.dense();
    if ((hd - hd.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw Error(ErrorCode::InvalidParameter, "Hamiltonian is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Dense> es(hd);
    Spectrum s{es.eigenvalues(), es.eigenvectors(), false};
    for (Eigen::Index k = 1; k < s.energies.size(); ++k)
        if (std::abs(s.energies(k) - s.energies(k - 1)) < 1e-12) s.degenerate = true;
    return s;
}

inline Eigen::VectorXd descending_eigenvalues(const Dense& rho) {
    Eigen::SelfAdjointEigenSolver<Dense> es(rho, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

inline void check_density(const Dense& rho, long dim) {
    if (rho.rows() != dim || rho.cols() != dim) throw Error(ErrorCode::Layout, "density and Hamiltonian dimensions differ");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9) throw Error(ErrorCode::InvalidState, "density is not Hermitian");
    if (std::abs(rho.trace() - cplx(1.0)) > 1e-9) throw Error(ErrorCode::InvalidState, "density trace != 1");
}

}  // namespace detail

/// Minimum-energy unitary orbit point: eigenvalues of rho in descending order
/// placed on the eigenstates of H_p in ascending energy order.
inline PassiveResult passive_state(const Dense& rho, const Operator& hp) {
    detail::check_density(rho, hp.dim());
    const auto spec = detail::spectrum_of(hp);
    const auto r = detail::descending_eigenvalues(rho);
    PassiveResult out;
    out.state = Dense::Zero(rho.rows(), rho.cols());
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        out.state += r(k) * spec.vectors.col(k) * spec.vectors.col(k).adjoint();
        out.energy += r(k) * spec.energies(k);
    }
    out.degenerate_spectrum = spec.degenerate;
    return out;
}

/// tr[H rho] - tr[H passive(rho)].
inline double ergotropy(const Dense& rho, const Operator& hp) {
    const auto passive = passive_state(rho, hp);
    const double e = expect(hp, QuantumState::unchecked(StateKind::Density, rho, SubsystemLayout({static_cast<int>(rho.rows())}))).real();
    return e - passive.energy;
}

/// Ergotropy of a load assumed diagonal in the Fock basis: sort-and-difference.
inline double ergotropy_diagonal(const PhononDistribution& dist) {
    const auto& p = dist.probs();
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double w = 0;
    for (std::size_t n = 0; n < p.size(); ++n) w += static_cast<double>(n) * (p[n] - sorted[n]);
    return w;
}

/// Wootters concurrence max(0, l1 - l2 - l3 - l4). With rho = W W^+ (W = eigenvectors
/// scaled by sqrt of the eigenvalues) the l_i are the singular values of W^T (sy x sy) W,
/// which avoids the square root of a nearly singular rho. Eigenvalues below 1e-14 are
/// treated as zero: concurrence moves like sqrt(p) under an admixture of weight p, so
/// round-off eigenvalues would otherwise show up at the 1e-8 level.
inline double concurrence(const Dense& rho) {
    if (rho.rows() != 4 || rho.cols() != 4) throw Error(ErrorCode::Layout, "concurrence needs a 4x4 matrix");
    Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (rho + rho.adjoint()));
    if (es.eigenvalues().minCoeff() < -1e-6) throw Error(ErrorCode::InvalidState, "two-qubit state has a negative eigenvalue");
    const Eigen::VectorXd ev = es.eigenvalues();
    const double cut = 1e-14 * std::max(1.0, ev.maxCoeff());
    Dense w = Dense::Zero(4, 4);
    for (Eigen::Index k = 0; k < 4; ++k)
        if (ev(k) > cut) w.col(k) = std::sqrt(ev(k)) * es.eigenvectors().col(k);

    Dense yy = Dense::Zero(4, 4);
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    const Dense tau = w.transpose() * yy * w;
    Eigen::JacobiSVD<Dense> svd(tau);
    const Eigen::VectorXd l = svd.singularValues();  // descending
    return std::max(0.0, l(0) - l(1) - l(2) - l(3));
}

/// Phase-insensitive overlap with the |SS>,|DD> Bell family: (P_SS + P_DD)/2 + |rho_{SS,DD}|.
inline double ms_fidelity(const Dense& rho) {
    if (rho.rows() != 4 || rho.cols() != 4) throw Error(ErrorCode::Layout, "ms_fidelity needs a 4x4 matrix");
    return 0.5 * (rho(0, 0).real() + rho(3, 3).real()) + std::abs(rho(0, 3));
}

}  // namespace qengine
