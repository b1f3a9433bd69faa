#pragma once

// Master-equation machinery:
//   drho/dt = -i[H, rho] + sum_i D[C_i] rho,  D[o]rho = o rho o^dag - 1/2 {o^dag o, rho}
//
// Density matrices are vectorized by column stacking, vec(A rho B) =
// (B^T kron A) vec(rho). The Liouvillian is stored sparse: for the Fock
// truncations used here a dense d^2 x d^2 matrix would run to hundreds of MB
// while only O(d^2) entries are nonzero.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "rifling/errors.hpp"
#include "rifling/qop.hpp"

namespace rifling {

using SparseComplex = Eigen::SparseMatrix<Complex>;

inline ComplexVector vec(const ComplexMatrix& m) {
    return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index dim) {
    if (v.size() != dim * dim) throw InvalidArgument("unvec: size mismatch");
    return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

inline ComplexMatrix dissipator_apply(const ComplexMatrix& o, const ComplexMatrix& rho) {
    if (!is_square(o) || !is_square(rho) || o.rows() != rho.rows())
        throw InvalidArgument("dissipator_apply: dimension mismatch");
    const ComplexMatrix od = o.adjoint();
    const ComplexMatrix odo = od * o;
    return o * rho * od - 0.5 * (odo * rho + rho * odo);
}

/// Right-hand side evaluated directly on the matrix, independent of the
/// superoperator route.
inline ComplexMatrix lindblad_rhs(const ComplexMatrix& h, const std::vector<ComplexMatrix>& collapse,
                                  const ComplexMatrix& rho) {
    ComplexMatrix out = -kI * (h * rho - rho * h);
    for (const auto& c : collapse) out += dissipator_apply(c, rho);
    return out;
}

namespace detail {

inline double max_abs(const SparseComplex& m) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < m.nonZeros(); ++i) v = std::max(v, std::abs(m.valuePtr()[i]));
    return v;
}

inline std::vector<Eigen::Triplet<Complex>> nonzeros(const ComplexMatrix& m) {
    std::vector<Eigen::Triplet<Complex>> t;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (m(i, j) != Complex{0.0, 0.0}) t.emplace_back(i, j, m(i, j));
    return t;
}

/// Appends scale * (a kron b) to the triplet list.
inline void add_kron(std::vector<Eigen::Triplet<Complex>>& out, const ComplexMatrix& a, const ComplexMatrix& b,
                     Complex scale) {
    const auto na = nonzeros(a);
    const auto nb = nonzeros(b);
    out.reserve(out.size() + na.size() * nb.size());
    for (const auto& x : na)
        for (const auto& y : nb)
            out.emplace_back(x.row() * b.rows() + y.row(), x.col() * b.cols() + y.col(), scale * x.value() * y.value());
}

}  // namespace detail

class Liouvillian {
public:
    Liouvillian() = default;
    Liouvillian(SparseComplex matrix, Eigen::Index dim) : matrix_(std::move(matrix)), dim_(dim) {}

    [[nodiscard]] const SparseComplex& matrix() const noexcept { return matrix_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] ComplexMatrix dense() const { return ComplexMatrix(matrix_); }

    [[nodiscard]] ComplexVector apply(const ComplexVector& v) const { return matrix_ * v; }
    [[nodiscard]] ComplexMatrix apply(const ComplexMatrix& rho) const { return unvec(matrix_ * vec(rho), dim_); }

private:
    SparseComplex matrix_;
    Eigen::Index dim_ = 0;
};

inline Liouvillian build_liouvillian(const ComplexMatrix& h, const std::vector<ComplexMatrix>& collapse) {
    if (!is_square(h)) throw InvalidArgument("build_liouvillian: Hamiltonian is not square");
    const Eigen::Index d = h.rows();
    for (const auto& c : collapse)
        if (c.rows() != d || c.cols() != d) throw InvalidArgument("build_liouvillian: collapse operator dimension mismatch");

    const ComplexMatrix id = ComplexMatrix::Identity(d, d);
    std::vector<Eigen::Triplet<Complex>> t;
    detail::add_kron(t, id, h, -kI);
    detail::add_kron(t, h.transpose(), id, kI);
    for (const auto& c : collapse) {
        const ComplexMatrix cdc = c.adjoint() * c;
        detail::add_kron(t, c.conjugate(), c, 1.0);
        detail::add_kron(t, id, cdc, -0.5);
        detail::add_kron(t, cdc.transpose(), id, -0.5);
    }
    SparseComplex m(d * d, d * d);
    m.setFromTriplets(t.begin(), t.end());
    m.prune(Complex{0.0, 0.0});
    m.makeCompressed();
    return {std::move(m), d};
}

/// Steady state from the bordered system: the row of L belonging to rho_00
/// is replaced by the trace functional and L' x = e_0 is solved directly.
inline ComplexMatrix steady_state(const Liouvillian& L) {
    const Eigen::Index d = L.dim();
    const Eigen::Index n = d * d;
    if (n == 0) throw InvalidArgument("steady_state: empty Liouvillian");

    std::vector<Eigen::Triplet<Complex>> t;
    t.reserve(static_cast<std::size_t>(L.matrix().nonZeros() + d));
    for (Eigen::Index k = 0; k < L.matrix().outerSize(); ++k)
        for (SparseComplex::InnerIterator it(L.matrix(), k); it; ++it)
            if (it.row() != 0) t.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < d; ++i) t.emplace_back(0, i + i * d, 1.0);
    SparseComplex bordered(n, n);
    bordered.setFromTriplets(t.begin(), t.end());
    bordered.makeCompressed();

    Eigen::SparseLU<SparseComplex, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(bordered);
    lu.factorize(bordered);
    if (lu.info() != Eigen::Success)
        throw DegenerateSteadyState("steady_state: bordered Liouvillian is singular (no unique steady state)");
    ComplexVector rhs = ComplexVector::Zero(n);
    rhs[0] = 1.0;
    ComplexVector x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw DegenerateSteadyState("steady_state: solve failed");

    // One step of iterative refinement against the original bordered system.
    const ComplexVector r = rhs - bordered * x;
    x += lu.solve(r);

    ComplexMatrix rho = unvec(x, d);
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace();

    // A second steady state shows up as a bordered system that is singular
    // to working precision; the LU then returns a vector that does not solve L.
    const double residual = (L.matrix() * vec(rho)).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, detail::max_abs(L.matrix()));
    if (!(residual <= 1e-6 * scale))
        throw DegenerateSteadyState("steady_state: residual " + std::to_string(residual) + " indicates a degenerate null space");
    return rho;
}

inline double steady_state_residual(const Liouvillian& L, const ComplexMatrix& rho) {
    return (L.matrix() * vec(rho)).cwiseAbs().maxCoeff();
}

inline double min_eigenvalue(const ComplexMatrix& rho) {
    const ComplexMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

// ---------------------------------------------------------------------------
// Time evolution

/// Piecewise-constant generator: segment i is active on (t_end[i-1], t_end[i]].
struct LiouvillianSegment {
    double t_end = 0.0;
    Liouvillian generator;
};

struct Observable {
    std::string name;
    ComplexMatrix op;
};

struct EvolveOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    long max_steps = 50'000'000;
    double initial_step = 0.0;            // 0 = automatic
    bool store_states = false;
    std::size_t positivity_stride = 1;    // eigen-check every n-th stored point, 0 = never
    double positivity_alarm = 1e-6;
};

struct Trajectory {
    std::vector<double> times;  // us
    std::vector<std::string> names;
    std::vector<std::vector<Complex>> series;  // series[k][i] = <names[k]> at times[i]
    std::vector<ComplexMatrix> states;
    ComplexMatrix final_state;  // state at the last grid time
    double max_trace_drift = 0.0;
    double min_eigenvalue = 0.0;
    std::vector<std::string> diagnostics;
    long steps_taken = 0;
    long steps_rejected = 0;

    [[nodiscard]] const std::vector<Complex>& get(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return series[k];
        throw InvalidArgument("Trajectory: no series named '" + name + "'");
    }
    [[nodiscard]] std::vector<double> real_series(const std::string& name) const {
        const auto& s = get(name);
        std::vector<double> out(s.size());
        std::transform(s.begin(), s.end(), out.begin(), [](Complex c) { return c.real(); });
        return out;
    }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DP5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline Eigen::RowVectorXcd trace_functional(const ComplexMatrix& op) {
    // Tr(O rho) = sum_ij O_ij rho_ji = vec(O^T) . vec(rho)
    const ComplexMatrix ot = op.transpose();
    return Eigen::Map<const Eigen::RowVectorXcd>(ot.data(), ot.size());
}

}  // namespace detail

/// Adaptive Dormand-Prince propagation through a piecewise-constant schedule.
/// Steps are clipped to land exactly on every output time and every segment
/// boundary; the step-size controller restarts at each boundary.
inline Trajectory evolve(const ComplexMatrix& rho0, const std::vector<LiouvillianSegment>& schedule,
                         const std::vector<double>& t_grid, const std::vector<Observable>& observables,
                         const EvolveOptions& opt = {}) {
    if (schedule.empty()) throw InvalidArgument("evolve: empty schedule");
    const Eigen::Index d = rho0.rows();
    if (!is_square(rho0)) throw InvalidArgument("evolve: rho0 is not square");
    for (const auto& seg : schedule)
        if (seg.generator.dim() != d) throw InvalidArgument("evolve: generator dimension mismatch");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (!(schedule[i].t_end > schedule[i - 1].t_end)) throw InvalidArgument("evolve: segment ends must increase");
    if (!is_hermitian(rho0, 1e-10)) throw InvalidArgument("evolve: rho0 is not Hermitian");
    if (std::abs(rho0.trace() - Complex{1.0, 0.0}) > 1e-10) throw InvalidArgument("evolve: rho0 trace is not 1");
    if (min_eigenvalue(rho0) < -1e-10) throw InvalidArgument("evolve: rho0 is not positive semidefinite");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("evolve: time grid must be strictly increasing");
    if (!t_grid.empty() && (t_grid.front() < 0.0 || t_grid.back() > schedule.back().t_end + 1e-12))
        throw InvalidArgument("evolve: time grid outside the schedule");
    for (const auto& o : observables)
        if (o.op.rows() != d || o.op.cols() != d) throw InvalidArgument("evolve: observable dimension mismatch");

    using detail::DP5;
    Trajectory traj;
    traj.times = t_grid;
    for (const auto& o : observables) traj.names.push_back(o.name);
    traj.series.assign(observables.size(), {});
    std::vector<Eigen::RowVectorXcd> functionals;
    for (const auto& o : observables) functionals.push_back(detail::trace_functional(o.op));
    const Eigen::RowVectorXcd trace_fn = detail::trace_functional(ComplexMatrix::Identity(d, d));

    ComplexVector y = vec(rho0);
    std::size_t stored = 0;
    traj.min_eigenvalue = min_eigenvalue(rho0);

    auto record = [&](const ComplexVector& state) {
        for (std::size_t k = 0; k < functionals.size(); ++k) traj.series[k].push_back(functionals[k] * state);
        const double drift = std::abs((trace_fn * state)(0) - Complex{1.0, 0.0});
        traj.max_trace_drift = std::max(traj.max_trace_drift, drift);
        const bool check = opt.positivity_stride > 0 && stored % opt.positivity_stride == 0;
        if (check || opt.store_states) {
            const ComplexMatrix rho = unvec(state, d);
            if (check) {
                const double lam = min_eigenvalue(rho);
                traj.min_eigenvalue = std::min(traj.min_eigenvalue, lam);
                if (lam < -opt.positivity_alarm)
                    traj.diagnostics.push_back("positivity violated at t=" + std::to_string(traj.times[stored]) +
                                               " us: min eigenvalue " + std::to_string(lam));
            }
            if (opt.store_states) traj.states.push_back(rho);
        }
        ++stored;
    };

    std::size_t next_out = 0;
    double t = 0.0;
    while (next_out < t_grid.size() && t_grid[next_out] <= 0.0) {
        record(y);
        ++next_out;
    }

    const Eigen::Index n = y.size();
    ComplexVector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

    double seg_start = 0.0;
    for (const auto& seg : schedule) {
        if (next_out >= t_grid.size()) break;
        const SparseComplex& L = seg.generator.matrix();
        const double seg_end = seg.t_end;
        // Fresh controller per segment so pulse edges are resolved.
        const double rate = std::max(1e-12, detail::max_abs(L));
        double h = opt.initial_step > 0 ? opt.initial_step : 0.01 / rate;
        h = std::min(h, seg_end - seg_start);
        k1 = L * y;
        while (t < seg_end && next_out < t_grid.size()) {
            const double target = std::min(seg_end, t_grid[next_out]);
            const bool clipped = t + h >= target;
            const double step = clipped ? target - t : h;
            if (traj.steps_taken + traj.steps_rejected >= opt.max_steps)
                throw ConvergenceError("evolve: step budget exhausted at t=" + std::to_string(t) + " us");

            ytmp = y + step * (DP5::a21 * k1);
            k2 = L * ytmp;
            ytmp = y + step * (DP5::a31 * k1 + DP5::a32 * k2);
            k3 = L * ytmp;
            ytmp = y + step * (DP5::a41 * k1 + DP5::a42 * k2 + DP5::a43 * k3);
            k4 = L * ytmp;
            ytmp = y + step * (DP5::a51 * k1 + DP5::a52 * k2 + DP5::a53 * k3 + DP5::a54 * k4);
            k5 = L * ytmp;
            ytmp = y + step * (DP5::a61 * k1 + DP5::a62 * k2 + DP5::a63 * k3 + DP5::a64 * k4 + DP5::a65 * k5);
            k6 = L * ytmp;
            ynew = y + step * (DP5::b1 * k1 + DP5::b3 * k3 + DP5::b4 * k4 + DP5::b5 * k5 + DP5::b6 * k6);
            k7 = L * ynew;
            err = step * (DP5::e1 * k1 + DP5::e3 * k3 + DP5::e4 * k4 + DP5::e5 * k5 + DP5::e6 * k6 + DP5::e7 * k7);

            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                const double e = std::abs(err[i]) / sc;
                acc += e * e;
            }
            const double enorm = std::sqrt(acc / static_cast<double>(n));
            if (!std::isfinite(enorm)) throw ConvergenceError("evolve: non-finite error estimate");

            if (enorm <= 1.0) {
                t = clipped ? target : t + step;
                y.swap(ynew);
                k1.swap(k7);
                ++traj.steps_taken;
                while (next_out < t_grid.size() && t_grid[next_out] <= t + 1e-12 * std::max(1.0, std::abs(t))) {
                    record(y);
                    ++next_out;
                }
                const double fac = enorm > 0 ? std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 5.0) : 5.0;
                // A clipped step says nothing about the natural step size.
                if (!clipped || step >= h) h *= fac;
            } else {
                ++traj.steps_rejected;
                h = step * std::clamp(0.9 * std::pow(enorm, -0.2), 0.1, 0.9);
                if (h < 1e-14 * std::max(1.0, t)) throw ConvergenceError("evolve: step size underflow at t=" + std::to_string(t));
            }
        }
        seg_start = seg_end;
    }
    if (next_out < t_grid.size()) throw InvalidArgument("evolve: time grid extends past the schedule");
    traj.final_state = unvec(y, d);
    if (traj.max_trace_drift > 1e-8)
        traj.diagnostics.push_back("trace drift " + std::to_string(traj.max_trace_drift) + " exceeds 1e-8");
    return traj;
}

/// Time-independent convenience overload.
inline Trajectory evolve(const ComplexMatrix& rho0, const ComplexMatrix& h, const std::vector<ComplexMatrix>& collapse,
                         const std::vector<double>& t_grid, const std::vector<Observable>& observables,
                         const EvolveOptions& opt = {}) {
    if (t_grid.empty()) throw InvalidArgument("evolve: empty time grid");
    std::vector<LiouvillianSegment> schedule{{t_grid.back(), build_liouvillian(h, collapse)}};
    if (t_grid.back() <= 0.0) schedule.front().t_end = 1.0;
    return evolve(rho0, schedule, t_grid, observables, opt);
}

}  // namespace rifling
