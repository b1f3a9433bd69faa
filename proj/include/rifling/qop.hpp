#pragma once

// Dense complex operator algebra on tensor-product Hilbert spaces.
//
// Level 0 of every qubit factor is the ground state |g>, level 1 the first
// excited state |e>. pauli_z() is |e><e| - |g><g|, so <pauli_z> = +1 in the
// excited state, and pauli_y is chosen so that (X, Y, Z) is right-handed:
// [X, Y] = 2iZ. Because |g> is stored first, pauli_y is minus the textbook
// matrix. The dispersive coupling in model.hpp is written in terms of
// |g><g| - |e><e| = -pauli_z(); that is the one place the sign flips.

#include <complex>
#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rifling/errors.hpp"

namespace rifling {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Ordered list of factor dimensions, e.g. {qubit1, qubit2, fock}.
class HilbertSpace {
public:
    HilbertSpace() = default;
    explicit HilbertSpace(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw InvalidArgument("HilbertSpace: no factors");
        for (auto d : dims_)
            if (d == 0) throw InvalidArgument("HilbertSpace: zero-dimensional factor");
    }

    [[nodiscard]] const std::vector<std::size_t>& factor_dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t factor_count() const noexcept { return dims_.size(); }
    [[nodiscard]] std::size_t factor_dim(std::size_t i) const { return dims_.at(i); }
    [[nodiscard]] std::size_t total_dim() const noexcept {
        return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>{});
    }

    friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;

private:
    std::vector<std::size_t> dims_;
};

inline ComplexMatrix identity(std::size_t n) {
    return ComplexMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

inline ComplexMatrix dagger(const ComplexMatrix& m) { return m.adjoint(); }

inline bool is_square(const ComplexMatrix& m) { return m.rows() == m.cols(); }

inline bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12) {
    if (!is_square(m)) return false;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Truncated bosonic lowering operator: a[k-1,k] = sqrt(k).
inline ComplexMatrix annihilation(std::size_t n_levels) {
    if (n_levels < 2) throw InvalidArgument("annihilation: need at least 2 levels");
    const auto n = static_cast<Eigen::Index>(n_levels);
    ComplexMatrix a = ComplexMatrix::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

inline ComplexMatrix creation(std::size_t n_levels) { return annihilation(n_levels).adjoint(); }

inline ComplexMatrix number_op(std::size_t n_levels) {
    if (n_levels < 1) throw InvalidArgument("number_op: need at least 1 level");
    const auto n = static_cast<Eigen::Index>(n_levels);
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
    return m;
}

/// |k><l| on a space of dimension dim.
inline ComplexMatrix transition_op(std::size_t k, std::size_t l, std::size_t dim) {
    if (k >= dim || l >= dim) throw InvalidArgument("transition_op: level index out of range");
    const auto n = static_cast<Eigen::Index>(dim);
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = 1.0;
    return m;
}

// Two-level operators.
inline ComplexMatrix sigma_minus() { return transition_op(0, 1, 2); }  // |g><e|
inline ComplexMatrix sigma_plus() { return transition_op(1, 0, 2); }   // |e><g|
inline ComplexMatrix pauli_x() { return sigma_plus() + sigma_minus(); }
inline ComplexMatrix pauli_y() { return kI * (sigma_minus() - sigma_plus()); }
inline ComplexMatrix pauli_z() { return transition_op(1, 1, 2) - transition_op(0, 0, 2); }

/// Ideal rotation by `angle` about the equatorial axis at azimuth `phase`
/// (phase 0 = x, pi/2 = y): exp(-i angle/2 (cos(phase) X + sin(phase) Y)).
inline ComplexMatrix qubit_rotation(double phase, double angle) {
    const ComplexMatrix axis = std::cos(phase) * pauli_x() + std::sin(phase) * pauli_y();
    return std::cos(angle / 2) * identity(2) - kI * std::sin(angle / 2) * axis;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// I x ... x op x ... x I with op in slot factor_index.
inline ComplexMatrix embed(const ComplexMatrix& op, const HilbertSpace& space, std::size_t factor_index) {
    if (factor_index >= space.factor_count()) throw InvalidArgument("embed: factor index out of range");
    const auto d = static_cast<Eigen::Index>(space.factor_dim(factor_index));
    if (op.rows() != d || op.cols() != d)
        throw InvalidArgument("embed: operator dimension does not match factor " + std::to_string(factor_index));
    std::size_t left = 1, right = 1;
    for (std::size_t i = 0; i < factor_index; ++i) left *= space.factor_dim(i);
    for (std::size_t i = factor_index + 1; i < space.factor_count(); ++i) right *= space.factor_dim(i);
    return kron(kron(identity(left), op), identity(right));
}

struct EigenDecomposition {
    RealVector values;     // ascending
    ComplexMatrix vectors; // column i belongs to values[i]
};

inline EigenDecomposition herm_eig(const ComplexMatrix& m) {
    if (!is_hermitian(m, 1e-10)) throw InvalidArgument("herm_eig: matrix is not Hermitian");
    // Symmetrize so round-off in the input does not leak into the spectrum.
    const ComplexMatrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
    if (solver.info() != Eigen::Success) throw ConvergenceError("herm_eig: eigen solver failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
/// Eigenvalues in [-1e-10, 0) are clamped to zero.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& m) {
    auto [values, vectors] = herm_eig(m);
    RealVector roots(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] < -1e-10) throw NotPositiveSemidefinite("psd_sqrt: negative eigenvalue " + std::to_string(values[i]));
        roots[i] = std::sqrt(std::max(values[i], 0.0));
    }
    ComplexMatrix r = vectors * roots.cast<Complex>().asDiagonal() * vectors.adjoint();
    return 0.5 * (r + r.adjoint());
}

inline Complex expect(const ComplexMatrix& op, const ComplexMatrix& rho) { return (op * rho).trace(); }

}  // namespace rifling
