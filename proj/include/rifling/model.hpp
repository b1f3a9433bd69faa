#pragma once

// Qubit(s) + resonator model in the frame rotating with both the qubit drive
// and the resonator probe.
//
// Two-level qubits:
//   H = dw_r a^dag a + chi a^dag a sz + eps/2 (a + a^dag) + dw_q |e><e|
//       + Omega/2 (cos(phi) X + sin(phi) Y)
// with sz = |g><g| - |e><e|, so a qubit in |g> pulls the resonator by +chi
// and the ground-state transmission peak sits at probe frequency w_r + chi.
//
// Transmon (n_levels >= 3): level k has rotating-frame energy
// k*dw_q - alpha*k(k-1)/2, the resonator pull on level k is
// (chi_k - chi_{k-1}) - chi_1/2 with chi_k = (k+1) g0^2 / (Delta + k alpha),
// and the drive couples k <-> k+1 with strength Omega/2 sqrt(k+1). The
// constant chi_1/2 moves the resonator frame to the midpoint of the |g> and
// |e> resonances, so that restricting to levels {0,1} gives back the
// two-level Hamiltonian with chi = chi_0 - chi_1/2. Delta = w_r - w_q is
// solved from that relation.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rifling/errors.hpp"
#include "rifling/qop.hpp"

namespace rifling {

inline constexpr std::size_t kMaxHilbertDim = 4096;
inline constexpr std::size_t kDefaultFockLevels = 30;
inline constexpr double kFockTailTolerance = 1e-6;

struct QubitParams {
    double delta_omega_q = 0.0;  // drive detuning w_q - w_drive, rad/us
    double chi = 0.0;            // dispersive shift, rad/us
    double rabi = 0.0;           // Rabi frequency, rad/us
    double rabi_phase = 0.0;     // drive axis azimuth, rad (0 = x)
    double gamma_down = 0.0;     // 1/us
    double gamma_up = 0.0;       // 1/us
    double gamma_phi = 0.0;      // 1/us
    std::size_t n_levels = 2;
    double anharmonicity = 0.0;  // alpha, rad/us (w_21 = w_q - alpha)
    double g0 = 0.0;             // bare coupling of the 0-1 transition, rad/us

    [[nodiscard]] double gamma2() const noexcept { return gamma_phi + 0.5 * (gamma_down + gamma_up); }
};

struct ResonatorParams {
    double delta_omega_r = 0.0;  // w_r - w_probe, rad/us
    double kappa = 0.0;          // 1/us
    double drive_amp = 0.0;      // eps_d, rad/us
    std::size_t fock_levels = kDefaultFockLevels;
};

struct SystemParams {
    std::vector<QubitParams> qubits;
    ResonatorParams resonator;
};

inline HilbertSpace hilbert_space(const SystemParams& p) {
    std::vector<std::size_t> dims;
    for (const auto& q : p.qubits) dims.push_back(q.n_levels);
    dims.push_back(p.resonator.fock_levels);
    return HilbertSpace(std::move(dims));
}

inline void validate(const SystemParams& p) {
    if (p.qubits.empty() || p.qubits.size() > 2) throw InvalidArgument("SystemParams: need one or two qubits");
    const auto& r = p.resonator;
    if (!(r.kappa > 0.0)) throw InvalidArgument("SystemParams: kappa must be positive");
    if (r.fock_levels < 2) throw InvalidArgument("SystemParams: fock_levels must be >= 2");
    std::size_t dim = r.fock_levels;
    for (std::size_t i = 0; i < p.qubits.size(); ++i) {
        const auto& q = p.qubits[i];
        const std::string tag = "SystemParams: qubit " + std::to_string(i) + ": ";
        if (q.n_levels < 2) throw InvalidArgument(tag + "n_levels must be >= 2");
        if (q.gamma_down < 0 || q.gamma_up < 0 || q.gamma_phi < 0) throw InvalidArgument(tag + "rates must be >= 0");
        if (q.n_levels >= 3 && !(q.g0 > 0 && q.anharmonicity > 0 && q.chi > 0))
            throw InvalidArgument(tag + "transmon model needs positive g0, anharmonicity and chi");
        dim *= q.n_levels;
        if (dim > kMaxHilbertDim) throw CapacityError("SystemParams: Hilbert dimension exceeds " + std::to_string(kMaxHilbertDim));
    }
}

// ---------------------------------------------------------------------------
// Transmon dispersive shifts

/// Qubit-resonator detuning Delta = w_r - w_q implied by the effective
/// two-level shift chi = g0^2/Delta - g0^2/(Delta + alpha).
inline double transmon_detuning(const QubitParams& q) {
    const double chi = q.chi, alpha = q.anharmonicity, g2 = q.g0 * q.g0;
    const double disc = chi * chi * alpha * alpha + 4.0 * chi * g2 * alpha;
    return (-chi * alpha + std::sqrt(disc)) / (2.0 * chi);
}

/// chi_k = g_k^2 / (w_r - w_{k+1,k}) with g_k = sqrt(k+1) g0 and
/// w_{k+1,k} = w_q - k alpha, for k = 0 .. n_levels-1.
inline std::vector<double> transmon_dispersive_shifts(const QubitParams& q) {
    const double delta = transmon_detuning(q);
    std::vector<double> chi(q.n_levels);
    for (std::size_t k = 0; k < q.n_levels; ++k) {
        const double gk2 = static_cast<double>(k + 1) * q.g0 * q.g0;
        chi[k] = gk2 / (delta + static_cast<double>(k) * q.anharmonicity);
    }
    return chi;
}

/// Per-level resonator pull, chi_k - chi_{k-1} with chi_{-1} = 0, before the
/// frame offset is subtracted.
inline std::vector<double> transmon_level_pulls(const QubitParams& q) {
    const auto chi = transmon_dispersive_shifts(q);
    std::vector<double> pull(q.n_levels);
    for (std::size_t k = 0; k < q.n_levels; ++k) pull[k] = chi[k] - (k == 0 ? 0.0 : chi[k - 1]);
    return pull;
}

inline double transmon_frame_offset(const QubitParams& q) { return 0.5 * transmon_dispersive_shifts(q).at(1); }

/// Diagonal of the resonator pull operator (coefficient of a^dag a per level).
inline std::vector<double> level_pulls(const QubitParams& q) {
    if (q.n_levels == 2) return {q.chi, -q.chi};
    auto pull = transmon_level_pulls(q);
    const double offset = transmon_frame_offset(q);
    for (auto& v : pull) v -= offset;
    return pull;
}

// ---------------------------------------------------------------------------
// Operators on the full space

inline ComplexMatrix resonator_annihilation(const SystemParams& p) {
    const auto space = hilbert_space(p);
    return embed(annihilation(p.resonator.fock_levels), space, space.factor_count() - 1);
}

inline ComplexMatrix resonator_number(const SystemParams& p) {
    const auto space = hilbert_space(p);
    return embed(number_op(p.resonator.fock_levels), space, space.factor_count() - 1);
}

/// Projector onto the top Fock level, used for truncation checks.
inline ComplexMatrix fock_top_projector(const SystemParams& p) {
    const auto space = hilbert_space(p);
    const auto n = p.resonator.fock_levels;
    return embed(transition_op(n - 1, n - 1, n), space, space.factor_count() - 1);
}

/// |level><level| of one qubit on the full space.
inline ComplexMatrix qubit_projector(const SystemParams& p, std::size_t qubit, std::size_t level) {
    const auto space = hilbert_space(p);
    return embed(transition_op(level, level, p.qubits.at(qubit).n_levels), space, qubit);
}

/// |k><l| of one qubit on the full space.
inline ComplexMatrix qubit_transition(const SystemParams& p, std::size_t qubit, std::size_t k, std::size_t l) {
    const auto space = hilbert_space(p);
    return embed(transition_op(k, l, p.qubits.at(qubit).n_levels), space, qubit);
}

/// Qubit-local drive operator cos(phi) X + sin(phi) Y generalized to the
/// ladder: sum_k sqrt(k+1) (e^{-i phi}|k+1><k| + h.c.).
inline ComplexMatrix ladder_drive(std::size_t n_levels, double phase) {
    const auto n = static_cast<Eigen::Index>(n_levels);
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    const Complex w = std::polar(1.0, -phase);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const double s = std::sqrt(static_cast<double>(k + 1));
        m(k + 1, k) = s * w;
        m(k, k + 1) = s * std::conj(w);
    }
    return m;
}

/// Rotating-frame qubit energies (diagonal of H_q).
inline std::vector<double> qubit_level_energies(const QubitParams& q) {
    std::vector<double> e(q.n_levels);
    for (std::size_t k = 0; k < q.n_levels; ++k) {
        const double kd = static_cast<double>(k);
        e[k] = kd * q.delta_omega_q - (q.n_levels == 2 ? 0.0 : q.anharmonicity * kd * (kd - 1.0) / 2.0);
    }
    return e;
}

inline ComplexMatrix build_hamiltonian(const SystemParams& p) {
    validate(p);
    const auto space = hilbert_space(p);
    const auto dim = static_cast<Eigen::Index>(space.total_dim());
    const std::size_t cav = space.factor_count() - 1;
    const auto& r = p.resonator;

    const ComplexMatrix a_local = annihilation(r.fock_levels);
    const ComplexMatrix n_local = number_op(r.fock_levels);

    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    h += r.delta_omega_r * embed(n_local, space, cav);
    h += 0.5 * r.drive_amp * embed(a_local + a_local.adjoint(), space, cav);

    for (std::size_t i = 0; i < p.qubits.size(); ++i) {
        const auto& q = p.qubits[i];
        const auto nq = static_cast<Eigen::Index>(q.n_levels);
        const auto energies = qubit_level_energies(q);
        const auto pulls = level_pulls(q);
        ComplexMatrix hq = ComplexMatrix::Zero(nq, nq);
        ComplexMatrix pull = ComplexMatrix::Zero(nq, nq);
        for (Eigen::Index k = 0; k < nq; ++k) {
            hq(k, k) = energies[static_cast<std::size_t>(k)];
            pull(k, k) = pulls[static_cast<std::size_t>(k)];
        }
        hq += 0.5 * q.rabi * ladder_drive(q.n_levels, q.rabi_phase);
        h += embed(hq, space, i);
        h += embed(pull, space, i) * embed(n_local, space, cav);
    }
    return 0.5 * (h + h.adjoint());
}

/// Collapse operators, in the order: resonator decay, then per qubit the
/// decay ladder, the excitation ladder and dephasing. Zero-rate channels are
/// left out.
inline std::vector<ComplexMatrix> build_collapse_ops(const SystemParams& p) {
    validate(p);
    const auto space = hilbert_space(p);
    std::vector<ComplexMatrix> ops;
    ops.push_back(std::sqrt(p.resonator.kappa) * resonator_annihilation(p));

    for (std::size_t i = 0; i < p.qubits.size(); ++i) {
        const auto& q = p.qubits[i];
        const std::size_t n = q.n_levels;
        // gamma_k ~ k gamma for the k -> k-1 step.
        if (q.gamma_down > 0)
            for (std::size_t k = 1; k < n; ++k)
                ops.push_back(std::sqrt(static_cast<double>(k) * q.gamma_down) * embed(transition_op(k - 1, k, n), space, i));
        if (q.gamma_up > 0)
            for (std::size_t k = 1; k < n; ++k)
                ops.push_back(std::sqrt(static_cast<double>(k) * q.gamma_up) * embed(transition_op(k, k - 1, n), space, i));
        if (q.gamma_phi > 0) {
            if (n == 2) {
                ops.push_back(std::sqrt(q.gamma_phi / 2.0) * embed(pauli_z(), space, i));
            } else {
                // 2 * level-number operator: equals pauli_z + I on {0,1}.
                ops.push_back(std::sqrt(q.gamma_phi / 2.0) * embed(2.0 * number_op(n), space, i));
            }
        }
    }
    return ops;
}

}  // namespace rifling
