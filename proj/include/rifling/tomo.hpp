#pragma once

// Density-matrix utilities, fidelity, the two-qubit rifled tomography
// protocol and the phase-noise dephasing estimates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "rifling/errors.hpp"
#include "rifling/experiments.hpp"
#include "rifling/lindblad.hpp"
#include "rifling/model.hpp"
#include "rifling/qop.hpp"
#include "rifling/units.hpp"

namespace rifling {

class DensityMatrix {
public:
    DensityMatrix(ComplexMatrix m, HilbertSpace space) : matrix_(std::move(m)), space_(std::move(space)) {
        const auto d = static_cast<Eigen::Index>(space_.total_dim());
        if (matrix_.rows() != d || matrix_.cols() != d) throw InvalidArgument("DensityMatrix: size does not match the space");
        if (!is_hermitian(matrix_, 1e-10)) throw InvalidArgument("DensityMatrix: not Hermitian");
        if (std::abs(matrix_.trace() - Complex{1.0, 0.0}) > 1e-10) throw InvalidArgument("DensityMatrix: trace is not 1");
        if (min_eigenvalue(matrix_) < -1e-8) throw NotPositiveSemidefinite("DensityMatrix: negative eigenvalue");
    }
    explicit DensityMatrix(ComplexMatrix m)
        : DensityMatrix(m, HilbertSpace(std::vector<std::size_t>{static_cast<std::size_t>(m.rows())})) {}

    [[nodiscard]] const ComplexMatrix& matrix() const { return matrix_; }
    [[nodiscard]] const HilbertSpace& space() const { return space_; }
    [[nodiscard]] Eigen::Index dim() const { return matrix_.rows(); }

private:
    ComplexMatrix matrix_;
    HilbertSpace space_;
};

/// Reduced state on the factors in `keep` (any order; output follows the
/// original factor order).
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, const HilbertSpace& space, std::vector<std::size_t> keep) {
    const std::size_t m = space.factor_count();
    if (keep.empty()) throw InvalidArgument("partial_trace: nothing to keep");
    std::sort(keep.begin(), keep.end());
    if (std::adjacent_find(keep.begin(), keep.end()) != keep.end()) throw InvalidArgument("partial_trace: repeated factor");
    if (keep.back() >= m) throw InvalidArgument("partial_trace: factor index out of range");
    const auto D = static_cast<Eigen::Index>(space.total_dim());
    if (rho.rows() != D || rho.cols() != D) throw InvalidArgument("partial_trace: size does not match the space");

    std::vector<bool> kept(m, false);
    for (auto k : keep) kept[k] = true;
    // strides of the full index, and of the kept and traced sub-indices
    std::vector<std::size_t> dims(m), stride(m), kstride(m, 0), tstride(m, 0);
    std::size_t s = 1, ks = 1, ts = 1;
    for (std::size_t f = m; f-- > 0;) {
        dims[f] = space.factor_dim(f);
        stride[f] = s;
        s *= dims[f];
        if (kept[f]) {
            kstride[f] = ks;
            ks *= dims[f];
        } else {
            tstride[f] = ts;
            ts *= dims[f];
        }
    }
    std::vector<std::size_t> kidx(static_cast<std::size_t>(D)), tidx(static_cast<std::size_t>(D));
    for (std::size_t i = 0; i < static_cast<std::size_t>(D); ++i) {
        std::size_t k = 0, t = 0;
        for (std::size_t f = 0; f < m; ++f) {
            const std::size_t digit = (i / stride[f]) % dims[f];
            (kept[f] ? k : t) += digit * (kept[f] ? kstride[f] : tstride[f]);
        }
        kidx[i] = k;
        tidx[i] = t;
    }
    ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(ks), static_cast<Eigen::Index>(ks));
    for (Eigen::Index j = 0; j < D; ++j)
        for (Eigen::Index i = 0; i < D; ++i)
            if (tidx[static_cast<std::size_t>(i)] == tidx[static_cast<std::size_t>(j)])
                out(static_cast<Eigen::Index>(kidx[static_cast<std::size_t>(i)]), static_cast<Eigen::Index>(kidx[static_cast<std::size_t>(j)])) += rho(i, j);
    return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::size_t>& keep) {
    std::vector<std::size_t> k = keep;
    std::sort(k.begin(), k.end());
    const ComplexMatrix r = partial_trace(rho.matrix(), rho.space(), k);
    std::vector<std::size_t> dims;
    for (auto f : k) dims.push_back(rho.space().factor_dim(f));
    return DensityMatrix(0.5 * (r + r.adjoint()), HilbertSpace(dims));
}

/// Uhlmann fidelity [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2.
inline double fidelity(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols() || !is_square(rho))
        throw InvalidArgument("fidelity: dimension mismatch");
    // eigenvalues at rounding level are zero; their square roots would not be
    auto cutoff = [](const RealVector& v) {
        return 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(v.size()) *
               std::max(v.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    };
    auto [values, vectors] = herm_eig(0.5 * (rho + rho.adjoint()));
    if (values.minCoeff() < -1e-8) throw NotPositiveSemidefinite("fidelity: negative eigenvalue");
    const double c0 = cutoff(values);
    RealVector roots(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) roots[i] = values[i] > c0 ? std::sqrt(values[i]) : 0.0;
    const ComplexMatrix s = vectors * roots.cast<Complex>().asDiagonal() * vectors.adjoint();
    ComplexMatrix m = s * sigma * s;
    m = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
    const double c1 = cutoff(es.eigenvalues());
    double tr = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > c1) tr += std::sqrt(es.eigenvalues()(i));
    return tr * tr;
}

inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) { return fidelity(rho.matrix(), sigma.matrix()); }

/// Amplitude damping of a qubit for time t at rate gamma (acts on levels 0/1).
inline ComplexMatrix amplitude_damp(const ComplexMatrix& rho, const HilbertSpace& space, std::size_t qubit, double gamma,
                                    double t) {
    const double p = 1.0 - std::exp(-gamma * t);
    ComplexMatrix k0 = ComplexMatrix::Zero(2, 2), k1 = ComplexMatrix::Zero(2, 2);
    k0(0, 0) = 1.0;
    k0(1, 1) = std::sqrt(1.0 - p);
    k1(0, 1) = std::sqrt(p);
    const ComplexMatrix a = embed(k0, space, qubit), b = embed(k1, space, qubit);
    return a * rho * a.adjoint() + b * rho * b.adjoint();
}

inline double coherence(const ComplexMatrix& qubit_rho) { return std::abs(qubit_rho(0, 1)); }

// ---------------------------------------------------------------- protocol

enum class RifleTarget { Qubit1, Qubit2, None };

struct TomographyOptions {
    double rifle_rabi = units::mhz(30.0);
    double rifle_start = units::ns(5.0);
    double rifle_duration = units::ns(1132.0);
    double cavity_start = units::ns(15.0);
    double cavity_duration = units::ns(500.0);  // 0 = no cavity pulse
    double photons = 6.8;                       // resonant photon number of the cavity pulse
    // Default: with a rifled target, the resonance seen with the other qubit
    // in |g> and the target locked in the lower dressed state, whose energy
    // -sqrt(Omega^2/4 + chi^2 n^2) pulls the resonator by chi^2/Omega at low n;
    // with no target, the bare resonator frequency.
    std::optional<double> probe_detuning;
    // tighter than the integrator default: ~120x120 states at Fock 30 drift
    // to -4e-8 in their smallest eigenvalue at 1e-8/1e-10
    EvolveOptions evolve{.rel_tol = 1e-9, .abs_tol = 1e-11};
};

struct TomographyResult {
    DensityMatrix joint;                    // qubit 1 (x) qubit 2
    double fidelity_vs_ideal = 0.0;         // joint state vs amplitude-damped ideal
    double target_fidelity = 0.0;           // rifled qubit's reduced state vs its ideal (joint value when none)
    std::vector<ComplexMatrix> reduced;     // per qubit
    std::vector<double> coherences;         // |rho_01| per qubit
    double drive_amp = 0.0;
    double probe_detuning = 0.0;
    std::size_t fock_levels = 0;
    double peak_photons = 0.0;
    double max_trace_drift = 0.0;
    double min_eigenvalue = 0.0;
};

inline std::optional<std::size_t> target_index(RifleTarget t) {
    if (t == RifleTarget::Qubit1) return 0;
    if (t == RifleTarget::Qubit2) return 1;
    return std::nullopt;
}

/// R_y^{pi/2} on both qubits, then `duration` of free evolution with a
/// cavity pulse and spin-locking of the target (drive along x, in quadrature
/// with the preparation). The resonator is traced out at the end.
inline TomographyResult rifled_tomography_protocol(SystemParams params, RifleTarget target, double duration,
                                                   const TomographyOptions& opt = {}) {
    validate(params);
    if (params.qubits.size() != 2) throw InvalidArgument("rifled_tomography_protocol: two qubits required");
    for (const auto& q : params.qubits)
        if (q.n_levels != 2) throw UnsupportedModel("rifled_tomography_protocol: two-level qubits only");
    if (!(duration > 0)) throw InvalidArgument("rifled_tomography_protocol: duration must be positive");
    for (auto& q : params.qubits) q.rabi = 0.0;
    const auto tgt = target_index(target);

    double ground = 0.0;
    for (const auto& q : params.qubits) ground -= q.chi;
    TomographyResult res{DensityMatrix(ComplexMatrix::Identity(4, 4) / 4.0, HilbertSpace({2, 2})), 0, 0, {}, {}, 0, 0, 0, 0, 0, 0};

    std::vector<CavityWindow> cw;
    if (opt.photons > 0 && opt.cavity_duration > 0) {
        // photon number fixed with the probe on resonance with the undriven cavity
        SystemParams cal = params;
        cal.resonator.delta_omega_r = ground;
        const Calibration c = calibrate_drive(cal, opt.photons);
        res.drive_amp = c.drive_amp;
        params.resonator.fock_levels = std::max<std::size_t>(c.fock_levels, 3);
        cw.push_back({opt.cavity_start, std::min(duration, opt.cavity_start + opt.cavity_duration), res.drive_amp});
    }
    if (opt.probe_detuning)
        res.probe_detuning = *opt.probe_detuning;
    else if (tgt) {
        const double chi = params.qubits[*tgt].chi;
        res.probe_detuning = ground + chi + chi * chi / opt.rifle_rabi;
    }
    params.resonator.delta_omega_r = res.probe_detuning;
    std::vector<DriveWindow> qw;
    if (tgt) qw.push_back({*tgt, opt.rifle_start, std::min(duration, opt.rifle_start + opt.rifle_duration), opt.rifle_rabi, 0.0});

    const double half_pi = 0.5 * std::numbers::pi;
    for (;;) {
        const auto space = hilbert_space(params);
        ComplexMatrix rho0 = ground_state(params);
        for (std::size_t i = 0; i < 2; ++i) rho0 = apply_unitary(qubit_gate(params, i, half_pi, half_pi), rho0);
        const PulseSchedule sched = schedule_from_windows(duration, 2, qw, cw);
        EvolveOptions eo = opt.evolve;
        eo.positivity_stride = std::max<std::size_t>(eo.positivity_stride, 1);
        const auto grid = uniform_grid(duration, units::ns(10.0));
        std::vector<double> t = grid;
        if (t.back() < duration - 1e-12) t.push_back(duration);
        const Trajectory tr = run_schedule(params, rho0, sched, t,
                                          {{"fock_top", fock_top_projector(params)}, {"n", resonator_number(params)}}, eo);
        double tail = 0;
        for (double v : tr.real_series("fock_top")) tail = std::max(tail, v);
        if (tail >= kFockTailTolerance) {
            params.resonator.fock_levels = next_fock(params.resonator.fock_levels);
            continue;
        }

        const ComplexMatrix joint = partial_trace(tr.final_state, space, {0, 1});
        res.joint = DensityMatrix(0.5 * (joint + joint.adjoint()), HilbertSpace({2, 2}));
        res.fock_levels = params.resonator.fock_levels;
        for (double v : tr.real_series("n")) res.peak_photons = std::max(res.peak_photons, v);
        res.max_trace_drift = tr.max_trace_drift;
        res.min_eigenvalue = tr.min_eigenvalue;

        // ideal prepared state, amplitude-damped with each qubit's T1
        const HilbertSpace qq({2, 2});
        ComplexMatrix ideal = ComplexMatrix::Zero(4, 4);
        ideal(0, 0) = 1.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const ComplexMatrix u = embed(qubit_rotation(half_pi, half_pi), qq, i);
            ideal = u * ideal * u.adjoint();
        }
        for (std::size_t i = 0; i < 2; ++i) ideal = amplitude_damp(ideal, qq, i, params.qubits[i].gamma_down, duration);
        res.fidelity_vs_ideal = fidelity(res.joint.matrix(), ideal);

        for (std::size_t i = 0; i < 2; ++i) {
            res.reduced.push_back(partial_trace(res.joint.matrix(), qq, {i}));
            res.coherences.push_back(coherence(res.reduced.back()));
        }
        res.target_fidelity = tgt ? fidelity(res.reduced[*tgt], partial_trace(ideal, qq, {*tgt})) : res.fidelity_vs_ideal;
        return res;
    }
}

// ---------------------------------------------------------------- dephasing

struct DephasingParams {
    double d_lambda = 1.0;   // d omega_q / d lambda
    double noise_amp = 0.0;  // A in S_lambda = A/|omega|
    double ir_cutoff = 0.0;  // omega_IR; carried but not used by the estimate
};

/// T_phi,E = D_lambda sqrt(A log 2), as printed.
inline double echo_dephasing_time(const DephasingParams& p) {
    if (!(p.noise_amp >= 0)) throw InvalidArgument("echo_dephasing_time: noise amplitude must be >= 0");
    return p.d_lambda * std::sqrt(p.noise_amp * std::log(2.0));
}

/// 1 / (D_lambda sqrt(A log 2)): the dimensionally consistent variant.
inline double echo_dephasing_time_reciprocal(const DephasingParams& p) {
    const double v = echo_dephasing_time(p);
    return v == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / v;
}

/// exp(-drift/4) for a diffusive phase drift (rad), as printed.
inline double phase_drift_coherence(double drift) {
    if (!(drift >= 0)) throw InvalidArgument("phase_drift_coherence: drift must be >= 0");
    return std::exp(-drift / 4.0);
}

}  // namespace rifling
