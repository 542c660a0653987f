#pragma once

// Phonon-number thermometry on the load mode. Blue-sideband excitation curves
// s_n(t) are simulated for each Fock state |n> of the COM mode; a measured
// signal is then a convex mixture sum_n P_n s_n(t), inverted by simplex-
// constrained least squares.

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "qengine/dynamics.hpp"
#include "qengine/engine.hpp"
#include "qengine/thermo.hpp"

namespace qengine {

struct ResponseBasis {
    std::vector<double> times;
    Eigen::MatrixXd curves;  // rows: times, cols: n = 0..nmax

    int nmax() const { return static_cast<int>(curves.cols()) - 1; }
    Eigen::VectorXd curve(int n) const { return curves.col(n); }
};

struct ResponseOptions {
    std::array<bool, 2> driven{true, true};  // masking one ion gives the single-ion response
    double dt = 0.02;
    int workers = 1;
};

/// Mean excitation per driven ion versus time, starting from |SS> (x) |n>.
inline ResponseBasis response_curves(int nmax, const std::vector<double>& times, const EngineParams& p,
                                     const ResponseOptions& opt = {}) {
    if (nmax < 0) throw Error(ErrorCode::InvalidParameter, "nmax must be >= 0");
    if (times.empty()) throw Error(ErrorCode::InvalidParameter, "response_curves(): no sample times");
    if (!(times.front() >= 0)) throw Error(ErrorCode::InvalidParameter, "sample times must be >= 0");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (times[k] < times[k - 1]) throw Error(ErrorCode::InvalidParameter, "sample times must be non-decreasing");
    if (!(nmax + 2 < p.com_levels))
        throw Error(ErrorCode::Truncation, "nmax + 2 must stay below the COM truncation (" +
                                               std::to_string(p.com_levels) + " levels)");
    const int ndriven = static_cast<int>(opt.driven[0]) + static_cast<int>(opt.driven[1]);
    if (ndriven == 0) throw Error(ErrorCode::InvalidParameter, "at least one ion must be driven");

    const SubsystemLayout layout({2, 2, p.com_levels}, {"q1", "q2", "com"});
    const auto h = blue_sideband_hamiltonian(p, layout, 2, std::max(times.back(), 1e-9), opt.driven);
    const auto q = qubit_ops();
    Operator excitation(Sparse(layout.total(), layout.total()));
    for (std::size_t i = 0; i < 2; ++i)
        if (opt.driven[i]) excitation = excitation + embed(q.projector_D, i, layout);
    excitation = (1.0 / ndriven) * excitation;

    ResponseBasis basis;
    basis.times = times;
    basis.curves = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), nmax + 1);

    auto one = [&](int n) {
        QuantumState rho = QuantumState::basis({0, 0, n}, layout).to_density();
        double t = 0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (times[k] > t) {
                rho = evolve(rho, h, {}, t, times[k], opt.dt).final_state;
                t = times[k];
            }
            basis.curves(static_cast<Eigen::Index>(k), n) = std::clamp(expect(excitation, rho).real(), 0.0, 1.0);
        }
    };
    std::atomic<int> next{0};
    auto work = [&] {
        for (int n = next++; n <= nmax; n = next++) one(n);
    };
    std::vector<std::jthread> pool;
    for (int w = 1; w < std::min(opt.workers, nmax + 1); ++w) pool.emplace_back(work);
    work();
    pool.clear();
    return basis;
}

/// Forward model sum_n P_n s_n(t).
inline std::vector<double> simulate_signal(const PhononDistribution& dist, const ResponseBasis& basis) {
    if (dist.nmax() > basis.nmax())
        throw Error(ErrorCode::InvalidParameter, "distribution reaches n=" + std::to_string(dist.nmax()) +
                                                     " beyond the basis nmax=" + std::to_string(basis.nmax()));
    std::vector<double> out(basis.times.size(), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k)
        for (int n = 0; n <= dist.nmax(); ++n)
            out[k] += dist[static_cast<std::size_t>(n)] * basis.curves(static_cast<Eigen::Index>(k), n);
    return out;
}

struct FitOptions {
    std::optional<double> noise_sigma;
    double tikhonov = 0.0;          // weight on |P|^2; 0 disables
    double condition_limit = 1e10;  // basis condition number above which the fit is refused
    int max_iterations = 500;
};

struct FitResult {
    PhononDistribution dist;
    double residual = 0;  // root-mean-square misfit
    std::optional<double> reduced_chi2;
    int nmax = 0;
    double regularization = 0;
    double condition = 0;
    int iterations = 0;
};

namespace detail {

/// min 1/2 p^T Q p - c^T p  subject to sum p = 1, p >= 0, by a primal active-set
/// method started from the uniform distribution. Q must be positive definite.
inline Eigen::VectorXd simplex_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& c, int max_iter, int& iterations) {
    const Eigen::Index k = q.rows();
    Eigen::VectorXd p = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    std::vector<bool> fixed(static_cast<std::size_t>(k), false);
    const double tol = 1e-13 * std::max(1.0, q.diagonal().cwiseAbs().maxCoeff());

    for (iterations = 0; iterations < max_iter; ++iterations) {
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < k; ++i)
            if (!fixed[static_cast<std::size_t>(i)]) free.push_back(i);
        const auto nf = static_cast<Eigen::Index>(free.size());

        // KKT system on the free set
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
        Eigen::VectorXd rhs(nf + 1);
        for (Eigen::Index a = 0; a < nf; ++a) {
            for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = q(free[a], free[b]);
            kkt(a, nf) = 1.0;
            kkt(nf, a) = 1.0;
            rhs(a) = c(free[a]);
        }
        rhs(nf) = 1.0;
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
        for (Eigen::Index a = 0; a < nf; ++a) z(free[a]) = sol(a);

        bool feasible = true;
        for (Eigen::Index a = 0; a < nf; ++a)
            if (z(free[a]) < 0) feasible = false;

        if (feasible) {
            p = z;
            // multipliers of the bound constraints: (Qp - c)_i - nu, nu = -sol(nf)
            const Eigen::VectorXd grad = q * p - c;
            const double nu = -sol(nf);
            Eigen::Index release = -1;
            double most_negative = -tol;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (!fixed[static_cast<std::size_t>(i)]) continue;
                const double mu = grad(i) - nu;
                if (mu < most_negative) {
                    most_negative = mu;
                    release = i;
                }
            }
            if (release < 0) return p;
            fixed[static_cast<std::size_t>(release)] = false;
            continue;
        }

        // step towards z until the first free component hits zero
        double alpha = 1.0;
        Eigen::Index block = -1;
        for (Eigen::Index a = 0; a < nf; ++a) {
            const Eigen::Index i = free[a];
            if (z(i) < 0) {
                const double r = p(i) / (p(i) - z(i));
                if (r < alpha) {
                    alpha = r;
                    block = i;
                }
            }
        }
        p += alpha * (z - p);
        if (block >= 0) {
            fixed[static_cast<std::size_t>(block)] = true;
            p(block) = 0.0;
        }
        for (Eigen::Index i = 0; i < k; ++i)
            if (p(i) <= 0.0) {
                p(i) = 0.0;
                fixed[static_cast<std::size_t>(i)] = true;
            }
    }
    throw Error(ErrorCode::IllPosedFit, "active-set iteration limit reached");
}

}  // namespace detail

/// Least-squares phonon populations on the probability simplex.
inline FitResult fit_populations(const std::vector<double>& signal, const ResponseBasis& basis,
                                 const FitOptions& opt = {}) {
    const auto m = static_cast<Eigen::Index>(signal.size());
    if (m != static_cast<Eigen::Index>(basis.times.size()))
        throw Error(ErrorCode::InvalidParameter, "signal length " + std::to_string(m) + " does not match " +
                                                     std::to_string(basis.times.size()) + " basis times");
    const Eigen::MatrixXd& a = basis.curves;
    const Eigen::Index k = a.cols();
    if (!(opt.tikhonov >= 0)) throw Error(ErrorCode::InvalidParameter, "tikhonov weight must be >= 0");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    const double cond = (m >= k && smin > 0) ? sv(0) / smin : std::numeric_limits<double>::infinity();
    if (m < k || !(cond <= opt.condition_limit))
        throw Error(ErrorCode::IllPosedFit, "response basis is rank deficient (" + std::to_string(m) + " samples, " +
                                                std::to_string(k) + " levels, condition " + std::to_string(cond) + ")");

    const Eigen::Map<const Eigen::VectorXd> y(signal.data(), m);
    Eigen::MatrixXd q = a.transpose() * a;
    q.diagonal().array() += opt.tikhonov;
    const Eigen::VectorXd c = a.transpose() * y;

    FitResult out;
    Eigen::VectorXd p = detail::simplex_qp(q, c, opt.max_iterations, out.iterations);
    p = p.cwiseMax(0.0);
    p /= p.sum();

    const Eigen::VectorXd r = a * p - y;
    out.residual = std::sqrt(r.squaredNorm() / static_cast<double>(m));
    if (opt.noise_sigma && *opt.noise_sigma > 0 && m > k)
        out.reduced_chi2 = r.squaredNorm() / (*opt.noise_sigma * *opt.noise_sigma) / static_cast<double>(m - k);
    out.dist = PhononDistribution(std::vector<double>(p.data(), p.data() + k), 1e-12);
    out.nmax = static_cast<int>(k) - 1;
    out.regularization = opt.tikhonov;
    out.condition = cond;
    return out;
}

/// Default sampling: `count` points evenly spread over [0, t_max] us.
inline std::vector<double> default_fit_times(double t_max = 100.0, int count = 200) {
    std::vector<double> t;
    for (int k = 0; k < count; ++k) t.push_back(t_max * k / (count - 1));
    return t;
}

}  // namespace qengine
