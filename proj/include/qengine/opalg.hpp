#pragma once

// Finite-dimensional operator algebra over the composite space
// qubit1 (x) qubit2 (x) breath Fock (x) COM Fock.
//
// Conventions used everywhere downstream:
//   qubit index 0 = |S> (ground), 1 = |D> (excited); sigma_z|D> = +|D>
//   Fock index = phonon number
//   tensor order = layout slot order, first slot most significant

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qengine/error.hpp"

namespace qengine {

using cplx = std::complex<double>;
using Dense = Eigen::MatrixXcd;
using DenseVec = Eigen::VectorXcd;
using Sparse = Eigen::SparseMatrix<cplx>;

inline constexpr double kPruneThreshold = 1e-15;

/// Ordered subsystem dimensions plus a label per slot. Immutable after construction.
class SubsystemLayout {
public:
    SubsystemLayout() = default;
    SubsystemLayout(std::vector<int> dims, std::vector<std::string> labels)
        : dims_(std::move(dims)), labels_(std::move(labels)) {
        if (dims_.empty()) throw Error(ErrorCode::Layout, "layout needs at least one slot");
        if (labels_.size() != dims_.size())
            throw Error(ErrorCode::Layout, "layout labels and dims differ in length");
        for (int d : dims_)
            if (d < 2) throw Error(ErrorCode::InvalidDimension, "subsystem dimension " + std::to_string(d) + " < 2");
    }
    explicit SubsystemLayout(std::vector<int> dims) : SubsystemLayout(dims, default_labels(dims.size())) {}

    /// The engine's full space: [qubit1, qubit2, breath, com].
    static SubsystemLayout engine(int breath_levels, int com_levels) {
        return SubsystemLayout({2, 2, breath_levels, com_levels}, {"q1", "q2", "breath", "com"});
    }

    const std::vector<int>& dims() const { return dims_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t slots() const { return dims_.size(); }
    int dim(std::size_t slot) const { return dims_.at(slot); }

    long total() const {
        long t = 1;
        for (int d : dims_) t *= d;
        return t;
    }

    /// Slot index for a label; throws on unknown label.
    std::size_t slot_of(const std::string& label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) throw Error(ErrorCode::Layout, "no slot labelled '" + label + "'");
        return static_cast<std::size_t>(it - labels_.begin());
    }

    /// Sub-layout over the given slots, kept in original relative order.
    SubsystemLayout select(const std::vector<std::size_t>& keep) const {
        std::vector<int> d;
        std::vector<std::string> l;
        for (std::size_t s : keep) {
            d.push_back(dims_.at(s));
            l.push_back(labels_.at(s));
        }
        return SubsystemLayout(std::move(d), std::move(l));
    }

    /// Concatenation A (x) B.
    SubsystemLayout concat(const SubsystemLayout& other) const {
        auto d = dims_;
        auto l = labels_;
        d.insert(d.end(), other.dims_.begin(), other.dims_.end());
        l.insert(l.end(), other.labels_.begin(), other.labels_.end());
        return SubsystemLayout(std::move(d), std::move(l));
    }

    bool operator==(const SubsystemLayout& o) const { return dims_ == o.dims_; }

private:
    static std::vector<std::string> default_labels(std::size_t n) {
        std::vector<std::string> l;
        for (std::size_t i = 0; i < n; ++i) l.push_back("s" + std::to_string(i));
        return l;
    }

    std::vector<int> dims_;
    std::vector<std::string> labels_;
};

/// Sparse complex operator on a finite space.
class Operator {
public:
    Operator() = default;
    explicit Operator(Sparse m, std::optional<SubsystemLayout> layout = std::nullopt)
        : mat_(std::move(m)), layout_(std::move(layout)) {
        if (mat_.rows() != mat_.cols()) throw Error(ErrorCode::InvalidDimension, "operator must be square");
        mat_.makeCompressed();
    }

    static Operator from_dense(const Dense& d, double prune = kPruneThreshold) {
        Sparse s = d.sparseView(1.0, prune);
        return Operator(std::move(s));
    }

    static Operator identity(long dim) {
        Sparse s(dim, dim);
        s.setIdentity();
        return Operator(std::move(s));
    }

    long dim() const { return mat_.rows(); }
    const Sparse& matrix() const { return mat_; }
    const std::optional<SubsystemLayout>& layout() const { return layout_; }
    Dense dense() const { return Dense(mat_); }

    Operator dagger() const { return Operator(Sparse(mat_.adjoint()), layout_); }

    /// Drops entries with magnitude below the threshold.
    Operator pruned(double threshold = kPruneThreshold) const {
        Sparse s = mat_;
        s.prune([threshold](const Eigen::Index&, const Eigen::Index&, const cplx& v) {
            return std::abs(v) > threshold;
        });
        return Operator(std::move(s), layout_);
    }

    Operator with_layout(SubsystemLayout l) const {
        if (l.total() != dim()) throw Error(ErrorCode::Layout, "layout total does not match operator dimension");
        return Operator(mat_, std::move(l));
    }

    friend Operator operator*(const Operator& a, const Operator& b) {
        check_same(a, b);
        return Operator(Sparse(a.mat_ * b.mat_), a.layout_).pruned();
    }
    friend Operator operator+(const Operator& a, const Operator& b) {
        check_same(a, b);
        return Operator(Sparse(a.mat_ + b.mat_), a.layout_).pruned();
    }
    friend Operator operator-(const Operator& a, const Operator& b) {
        check_same(a, b);
        return Operator(Sparse(a.mat_ - b.mat_), a.layout_).pruned();
    }
    friend Operator operator*(cplx s, const Operator& a) { return Operator(Sparse(s * a.mat_), a.layout_).pruned(); }
    friend Operator operator*(double s, const Operator& a) { return cplx(s, 0.0) * a; }

private:
    static void check_same(const Operator& a, const Operator& b) {
        if (a.dim() != b.dim())
            throw Error(ErrorCode::Layout, "operator dimensions differ: " + std::to_string(a.dim()) + " vs " +
                                               std::to_string(b.dim()));
    }

    Sparse mat_;
    std::optional<SubsystemLayout> layout_;
};

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

/// Sparse Kronecker product.
inline Sparse kron(const Sparse& a, const Sparse& b) {
    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka)
        for (Sparse::InnerIterator ia(a, ka); ia; ++ia)
            for (int kb = 0; kb < b.outerSize(); ++kb)
                for (Sparse::InnerIterator ib(b, kb); ib; ++ib)
                    trips.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                                       ia.value() * ib.value());
    Sparse out(a.rows() * b.rows(), a.cols() * b.cols());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

/// Dense Kronecker product.
inline Dense kron(const Dense& a, const Dense& b) {
    Dense out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Operator destroy(int dim) {
    if (dim < 2) throw Error(ErrorCode::InvalidDimension, "destroy(): dim " + std::to_string(dim) + " < 2");
    std::vector<Eigen::Triplet<cplx>> t;
    for (int n = 1; n < dim; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
    Sparse s(dim, dim);
    s.setFromTriplets(t.begin(), t.end());
    return Operator(std::move(s));
}

inline Operator create(int dim) { return destroy(dim).dagger(); }

/// a^+ a, built directly as diag(0, 1, ..., dim-1) so the entries are exact integers.
inline Operator number(int dim) {
    if (dim < 2) throw Error(ErrorCode::InvalidDimension, "number(): dim must be >= 2, got " + std::to_string(dim));
    Sparse n(dim, dim);
    for (int k = 1; k < dim; ++k) n.insert(k, k) = static_cast<double>(k);
    n.makeCompressed();
    return Operator(std::move(n));
}

struct QubitOps {
    Operator sigma_minus;  // |S><D|
    Operator sigma_plus;   // |D><S|
    Operator sigma_z;      // |D><D| - |S><S|
    Operator projector_S;
    Operator projector_D;
};

inline QubitOps qubit_ops() {
    auto single = [](int r, int c, cplx v) {
        Sparse s(2, 2);
        s.insert(r, c) = v;
        return Operator(std::move(s));
    };
    Sparse z(2, 2);
    z.insert(0, 0) = -1.0;
    z.insert(1, 1) = 1.0;
    return QubitOps{single(0, 1, 1.0), single(1, 0, 1.0), Operator(std::move(z)), single(0, 0, 1.0),
                    single(1, 1, 1.0)};
}

/// identity (x) ... (x) op (x) ... (x) identity, with op in `slot`.
inline Operator embed(const Operator& op, std::size_t slot, const SubsystemLayout& layout) {
    if (slot >= layout.slots()) throw Error(ErrorCode::Layout, "embed(): slot out of range");
    if (op.dim() != layout.dim(slot))
        throw Error(ErrorCode::Layout, "embed(): operator dim " + std::to_string(op.dim()) +
                                           " does not match slot dim " + std::to_string(layout.dim(slot)));
    long left = 1, right = 1;
    for (std::size_t s = 0; s < slot; ++s) left *= layout.dim(s);
    for (std::size_t s = slot + 1; s < layout.slots(); ++s) right *= layout.dim(s);
    Sparse l(left, left), r(right, right);
    l.setIdentity();
    r.setIdentity();
    return Operator(kron(kron(l, op.matrix()), r), layout).pruned();
}

enum class StateKind { Ket, Density };

/// Ket or density matrix over a layout. Kets are stored as a single column.
class QuantumState {
public:
    static QuantumState ket(DenseVec psi, SubsystemLayout layout, double tol = 1e-9) {
        if (psi.size() != layout.total()) throw Error(ErrorCode::Layout, "ket size does not match layout");
        if (std::abs(psi.squaredNorm() - 1.0) > tol) throw Error(ErrorCode::InvalidState, "ket is not normalized");
        return QuantumState(StateKind::Ket, Dense(psi), std::move(layout));
    }

    /// Checks shape, Hermiticity and trace. Positivity is checked separately by `min_eigenvalue()`.
    static QuantumState density(Dense rho, SubsystemLayout layout, double tol = 1e-9) {
        if (rho.rows() != layout.total() || rho.cols() != layout.total())
            throw Error(ErrorCode::Layout, "density shape does not match layout");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw Error(ErrorCode::InvalidState, "density matrix is not Hermitian");
        if (std::abs(rho.trace() - cplx(1.0)) > tol) throw Error(ErrorCode::InvalidState, "density trace != 1");
        return QuantumState(StateKind::Density, std::move(rho), std::move(layout));
    }

    /// No validation; for integrator internals and block-structured intermediates.
    static QuantumState unchecked(StateKind kind, Dense data, SubsystemLayout layout) {
        return QuantumState(kind, std::move(data), std::move(layout));
    }

    /// Computational basis ket |i0 i1 ...>.
    static QuantumState basis(const std::vector<int>& indices, const SubsystemLayout& layout) {
        if (indices.size() != layout.slots()) throw Error(ErrorCode::Layout, "basis(): wrong number of indices");
        long idx = 0;
        for (std::size_t s = 0; s < indices.size(); ++s) {
            if (indices[s] < 0 || indices[s] >= layout.dim(s)) throw Error(ErrorCode::Layout, "basis(): index out of range");
            idx = idx * layout.dim(s) + indices[s];
        }
        DenseVec v = DenseVec::Zero(layout.total());
        v(idx) = 1.0;
        return ket(std::move(v), layout);
    }

    StateKind kind() const { return kind_; }
    bool is_ket() const { return kind_ == StateKind::Ket; }
    const SubsystemLayout& layout() const { return layout_; }
    long dim() const { return layout_.total(); }

    const Dense& data() const { return data_; }
    Dense& data() { return data_; }

    DenseVec vector() const {
        if (!is_ket()) throw Error(ErrorCode::UnsupportedKind, "state is not a ket");
        return data_.col(0);
    }

    /// |psi><psi| for kets, a copy for densities.
    QuantumState to_density() const {
        if (!is_ket()) return *this;
        return QuantumState(StateKind::Density, data_ * data_.adjoint(), layout_);
    }

    const Dense& rho() const {
        if (is_ket()) throw Error(ErrorCode::UnsupportedKind, "state is a ket; call to_density() first");
        return data_;
    }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Dense> es(to_density().data_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    double purity() const {
        const Dense& r = to_density().data_;
        return (r * r).trace().real();
    }

private:
    QuantumState(StateKind k, Dense d, SubsystemLayout l) : kind_(k), data_(std::move(d)), layout_(std::move(l)) {}

    StateKind kind_ = StateKind::Density;
    Dense data_;
    SubsystemLayout layout_;
};

/// Product state; kets stay kets only if both factors are kets.
inline QuantumState tensor(const QuantumState& a, const QuantumState& b) {
    auto layout = a.layout().concat(b.layout());
    if (a.is_ket() && b.is_ket()) return QuantumState::unchecked(StateKind::Ket, kron(a.data(), b.data()), layout);
    return QuantumState::unchecked(StateKind::Density, kron(a.to_density().data(), b.to_density().data()), layout);
}

inline QuantumState tensor(std::initializer_list<QuantumState> parts) {
    auto it = parts.begin();
    QuantumState acc = *it++;
    for (; it != parts.end(); ++it) acc = tensor(acc, *it);
    return acc;
}

/// Reduced density matrix over `keep` (original relative order preserved).
inline QuantumState partial_trace(const QuantumState& state, std::vector<std::size_t> keep) {
    if (state.is_ket()) throw Error(ErrorCode::UnsupportedKind, "partial_trace() needs a density state");
    const auto& layout = state.layout();
    if (keep.empty()) throw Error(ErrorCode::Layout, "partial_trace(): keep set is empty");
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    for (auto s : keep)
        if (s >= layout.slots()) throw Error(ErrorCode::Layout, "partial_trace(): slot out of range");

    std::set<std::size_t> kept(keep.begin(), keep.end());
    std::vector<std::size_t> traced;
    for (std::size_t s = 0; s < layout.slots(); ++s)
        if (!kept.count(s)) traced.push_back(s);

    auto sub = layout.select(keep);
    const long nk = sub.total();
    long nt = 1;
    for (auto s : traced) nt *= layout.dim(s);

    // full index for (kept multi-index a, traced multi-index t)
    std::vector<long> stride(layout.slots());
    long acc = 1;
    for (std::size_t s = layout.slots(); s-- > 0;) {
        stride[s] = acc;
        acc *= layout.dim(s);
    }
    auto offsets = [&](const std::vector<std::size_t>& slots, long count) {
        std::vector<long> off(static_cast<std::size_t>(count));
        for (long i = 0; i < count; ++i) {
            long rem = i, o = 0;
            for (std::size_t k = slots.size(); k-- > 0;) {
                const int d = layout.dim(slots[k]);
                o += (rem % d) * stride[slots[k]];
                rem /= d;
            }
            off[static_cast<std::size_t>(i)] = o;
        }
        return off;
    };
    const auto keep_off = offsets(keep, nk);
    const auto trace_off = offsets(traced, nt);

    const Dense& rho = state.data();
    Dense out = Dense::Zero(nk, nk);
    for (long t = 0; t < nt; ++t) {
        const long ot = trace_off[static_cast<std::size_t>(t)];
        for (long j = 0; j < nk; ++j) {
            const long cj = keep_off[static_cast<std::size_t>(j)] + ot;
            for (long i = 0; i < nk; ++i) out(i, j) += rho(keep_off[static_cast<std::size_t>(i)] + ot, cj);
        }
    }
    return QuantumState::unchecked(StateKind::Density, std::move(out), std::move(sub));
}

/// Populations of the (truncated, renormalized) geometric distribution with mean nbar.
inline std::vector<double> thermal_populations(double nbar, int dim) {
    if (nbar < 0) throw Error(ErrorCode::InvalidParameter, "thermal occupation must be >= 0");
    if (dim < 2) throw Error(ErrorCode::InvalidDimension, "thermal dim < 2");
    std::vector<double> p(static_cast<std::size_t>(dim), 0.0);
    const double x = nbar / (1.0 + nbar);
    double w = 1.0, sum = 0.0;
    for (int n = 0; n < dim; ++n) {
        p[static_cast<std::size_t>(n)] = w;
        sum += w;
        w *= x;
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline QuantumState thermal_state(double nbar, int dim) {
    auto p = thermal_populations(nbar, dim);
    Dense rho = Dense::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) rho(n, n) = p[static_cast<std::size_t>(n)];
    return QuantumState::unchecked(StateKind::Density, std::move(rho), SubsystemLayout({dim}, {"mode"}));
}

/// <psi|A|psi> or tr[A rho].
inline cplx expect(const Operator& op, const QuantumState& state) {
    if (op.dim() != state.dim())
        throw Error(ErrorCode::Layout, "expect(): operator dim " + std::to_string(op.dim()) + " vs state dim " +
                                           std::to_string(state.dim()));
    const Sparse& a = op.matrix();
    if (state.is_ket()) {
        const auto psi = state.data().col(0);
        return psi.dot(a * psi);
    }
    const Dense& rho = state.data();
    cplx acc = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (Sparse::InnerIterator it(a, k); it; ++it) acc += it.value() * rho(it.col(), it.row());
    return acc;
}

}  // namespace qengine
